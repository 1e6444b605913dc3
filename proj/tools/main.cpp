#include "pietl/cli.hpp"

int main(int argc, char** argv) { return pietl::cli::main(argc, argv); }
