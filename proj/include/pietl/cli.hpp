#pragma once

// Command-line driver: synth, fit, timeline, eval, inspect.
// Exit codes: 0 ok, 1 usage, 2 data, 3 numerical.

#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pietl/baselines.hpp"
#include "pietl/config.hpp"
#include "pietl/corpus.hpp"
#include "pietl/dpm.hpp"
#include "pietl/errors.hpp"
#include "pietl/eval.hpp"
#include "pietl/summary.hpp"
#include "pietl/synth.hpp"
#include "pietl/timeline.hpp"

namespace pietl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumerical = 3;

inline constexpr const char* kToolVersion = "pietl 1.0";

class usage_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunManifest {
  std::string subcommand;
  std::string corpus_path, summary_path, gold_path, truth_path, names_path, config_path;
  std::string out_dir;
  std::uint64_t seed = 1;

  std::string preset = "separable";
  std::string model = "dpm";
  std::string mode = "ordinary";
  std::string shape = "temporal";
  std::string intra = "neg-log-p";
  std::string user;
  int chains = 1;
  std::size_t top = 10;

  // Explicit flag values override the config file.
  config::KeyValues overrides;
};

namespace detail {

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw io_error("cannot create output directory " + dir);
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out << text;
  if (!out) throw io_error("write failed for " + path);
}

inline std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline nlohmann::ordered_json base_provenance(const RunManifest& m) {
  nlohmann::ordered_json p;
  p["tool"] = kToolVersion;
  p["subcommand"] = m.subcommand;
  p["seed"] = m.seed;
  return p;
}

inline config::FitConfig fit_config(const RunManifest& m) {
  config::FitConfig c;
  if (!m.config_path.empty()) config::apply(config::read(m.config_path), c);
  config::apply(m.overrides, c);
  config::validate(c);
  return c;
}

// The ingestion settings a summary was fitted with.
inline IngestConfig ingest_for(const PosteriorSummary& s) {
  config::FitConfig c;
  if (s.provenance.contains("config")) config::apply(config::from_json(s.provenance.at("config")), c);
  return config::ingest_config(c);
}

struct Loaded {
  PosteriorSummary summary;
  Corpus corpus;
};

inline Loaded load_fitted(const RunManifest& m) {
  if (m.corpus_path.empty()) throw usage_error("--corpus is required");
  if (m.summary_path.empty()) throw usage_error("--summary is required");
  PosteriorSummary s = read_summary(m.summary_path);
  Corpus c = ingest(m.corpus_path, ingest_for(s));
  check_summary_matches(s, c);
  return {std::move(s), std::move(c)};
}

inline timeline::TimelineOptions timeline_options(const RunManifest& m) {
  timeline::TimelineOptions o;
  o.mode = timeline::parse_mode(m.mode);
  if (m.shape == "temporal") o.shape = timeline::ShapeStatistic::temporal;
  else if (m.shape == "lexical") o.shape = timeline::ShapeStatistic::lexical;
  else throw usage_error("--shape must be temporal or lexical");
  if (m.intra == "neg-log-p") o.cluster.intra = timeline::IntraClusterError::neg_log_p;
  else if (m.intra == "neg-p-log-p") o.cluster.intra = timeline::IntraClusterError::neg_p_log_p;
  else throw usage_error("--intra must be neg-log-p or neg-p-log-p");
  o.top_words = m.top;
  return o;
}

inline nlohmann::ordered_json timeline_provenance(const RunManifest& m, const PosteriorSummary& s) {
  auto p = base_provenance(m);
  p.erase("seed");
  p["mode"] = m.mode;
  p["shape"] = m.shape;
  p["intra"] = m.intra;
  p["names_file"] = m.names_path;
  p["summary"] = s.provenance;
  return p;
}

inline std::vector<timeline::Timeline> build_timelines(const RunManifest& m, const Loaded& in) {
  const auto opt = timeline_options(m);
  timeline::NameTable names;
  if (!m.names_path.empty()) names = timeline::read_names(m.names_path);
  if (opt.mode == timeline::Mode::celebrity && m.names_path.empty()) {
    throw usage_error("--mode celebrity requires --names-file");
  }
  std::vector<std::string> users;
  if (!m.user.empty()) {
    users.push_back(m.user);
  } else {
    users = in.corpus.users();
  }
  std::vector<timeline::Timeline> out;
  for (const auto& u : users) {
    auto tl = timeline::build_timeline(u, in.summary, in.corpus, opt, names);
    tl.provenance = timeline_provenance(m, in.summary);
    out.push_back(std::move(tl));
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

inline int cmd_synth(const RunManifest& m, std::ostream& log) {
  if (m.out_dir.empty()) throw usage_error("--out is required");
  synth::GenConfig gc;
  try {
    gc = synth::preset(m.preset);
  } catch (const std::invalid_argument& e) {
    throw usage_error(e.what());
  }
  const auto g = synth::generate(gc, m.seed);
  detail::ensure_dir(m.out_dir);
  auto prov = detail::base_provenance(m);
  prov["preset"] = m.preset;
  const std::string header = "# " + prov.dump() + "\n";
  std::ostringstream corpus, truth, gold;
  corpus << header;
  write_records(g.corpus, corpus);
  truth << header;
  synth::write_truth(g, truth);
  gold << header;
  synth::write_gold(g, gold);
  detail::write_file(detail::join_path(m.out_dir, "corpus.jsonl"), corpus.str());
  detail::write_file(detail::join_path(m.out_dir, "truth.jsonl"), truth.str());
  detail::write_file(detail::join_path(m.out_dir, "gold.tsv"), gold.str());
  config::FitConfig fc;
  fc.hyper = synth::sampler_hyper(gc);
  fc.lda.eta_x = fc.hyper.eta_x;
  fc.lda.eta_y = fc.hyper.eta_y;
  fc.lda.word_prior = fc.hyper.lambda;
  fc.epoch_days = static_cast<int>(gc.epoch_length / kSecondsPerDay);
  fc.origin = gc.origin;
  detail::write_file(detail::join_path(m.out_dir, "fit.conf"),
                     "# settings for fitting this corpus; " + prov.dump() + "\n" + config::to_text(fc));
  log << "synth: " << g.corpus.num_docs() << " documents, " << g.truth.events.size() << " planted events -> "
      << m.out_dir << '\n';
  return kExitOk;
}

inline PosteriorSummary fit_one(const std::string& model, const Corpus& corpus, const config::FitConfig& c,
                                std::uint64_t seed) {
  if (model == "dpm") return dpm::run_chain(corpus, c.hyper, c.schedule, seed, dpm::ModelKind::dpm);
  if (model == "public-dp") return baselines::fit_public_dp(corpus, c.hyper, c.schedule, seed);
  if (model == "person-dp") return baselines::fit_person_dp_all(corpus, c.hyper, c.schedule, seed);
  if (model == "mlda") return baselines::fit_multilevel_lda(corpus, c.lda, seed);
  throw usage_error("--model must be one of dpm, mlda, person-dp, public-dp");
}

// Chain k uses seed + k and writes summary.json (k = 0) or summary.chain<k>.json.
inline int cmd_fit(const RunManifest& m, std::ostream& log) {
  if (m.corpus_path.empty()) throw usage_error("--corpus is required");
  if (m.out_dir.empty()) throw usage_error("--out is required");
  if (m.chains < 1) throw usage_error("--chains must be >= 1");
  if (m.model != "dpm" && m.model != "mlda" && m.model != "person-dp" && m.model != "public-dp") {
    throw usage_error("--model must be one of dpm, mlda, person-dp, public-dp");
  }
  config::FitConfig c;
  try {
    c = detail::fit_config(m);
  } catch (const std::invalid_argument& e) {
    throw usage_error(e.what());
  }
  const Corpus corpus = ingest(m.corpus_path, config::ingest_config(c));
  detail::ensure_dir(m.out_dir);
  std::vector<std::future<PosteriorSummary>> jobs;
  for (int k = 0; k < m.chains; ++k) {
    jobs.push_back(std::async(std::launch::async, [&, k] {
      return fit_one(m.model, corpus, c, m.seed + static_cast<std::uint64_t>(k));
    }));
  }
  for (int k = 0; k < m.chains; ++k) {
    PosteriorSummary s = jobs[static_cast<std::size_t>(k)].get();
    auto prov = detail::base_provenance(m);
    prov["seed"] = m.seed + static_cast<std::uint64_t>(k);
    prov["model"] = m.model;
    prov["corpus"] = m.corpus_path;
    prov["config"] = config::to_json(c);
    s.provenance = std::move(prov);
    const std::string name = k == 0 ? "summary.json" : "summary.chain" + std::to_string(k) + ".json";
    write_summary(s, detail::join_path(m.out_dir, name));
  }
  log << "fit: " << m.model << " on " << corpus.num_docs() << " documents, " << m.chains << " chain(s) -> "
      << m.out_dir << '\n';
  return kExitOk;
}

inline int cmd_timeline(const RunManifest& m, std::ostream& log) {
  if (m.out_dir.empty()) throw usage_error("--out is required");
  const auto in = detail::load_fitted(m);
  const auto tls = detail::build_timelines(m, in);
  std::string text = "# " + detail::timeline_provenance(m, in.summary).dump() + "\n";
  auto arr = nlohmann::ordered_json::array();
  for (const auto& tl : tls) {
    text += timeline::timeline_to_text(tl, in.corpus);
    arr.push_back(timeline::timeline_to_json(tl, in.corpus));
  }
  detail::ensure_dir(m.out_dir);
  detail::write_file(detail::join_path(m.out_dir, "timeline.txt"), text);
  detail::write_file(detail::join_path(m.out_dir, "timeline.json"), arr.dump(2) + "\n");
  log << "timeline: " << tls.size() << " user(s) -> " << m.out_dir << '\n';
  return kExitOk;
}

inline int cmd_eval(const RunManifest& m, std::ostream& log) {
  if (m.out_dir.empty()) throw usage_error("--out is required");
  const auto in = detail::load_fitted(m);
  eval::GoldTimeline gold = m.gold_path.empty() ? eval::gold_from_corpus(in.corpus) : eval::read_gold(m.gold_path);
  eval::check_gold(gold, in.corpus);
  RunManifest all = m;
  all.user.clear();
  eval::DocSet predicted;
  for (const auto& tl : detail::build_timelines(all, in)) {
    const auto docs = timeline::predicted_docs(tl);
    predicted.insert(docs.begin(), docs.end());
  }
  eval::Report r;
  r.model = in.summary.model;
  r.mode = m.mode;
  const auto gd = eval::gold_docs(gold);
  r.predicted_docs = static_cast<long>(predicted.size());
  r.gold_docs = static_cast<long>(gd.size());
  for (const auto& [u, events] : gold) r.gold_events += static_cast<long>(events.size());
  r.event_recall = eval::event_recall(predicted, gold);
  r.tweet = eval::tweet_prf(predicted, gd);
  r.type_proportions = type_proportions(in.summary);
  if (!m.truth_path.empty()) {
    const auto truth = synth::read_truth(m.truth_path);
    r.label_accuracy = eval::label_accuracy(in.summary, truth);
    std::vector<std::int64_t> z;
    for (const auto& id : in.summary.doc_ids) {
      auto it = truth.find(id);
      if (it == truth.end()) throw data_error("truth file lacks document " + id);
      z.push_back(it->second.z);
    }
    r.topic_ari = eval::match_topics(in.summary.topics, z).ari;
  }
  auto prov = detail::timeline_provenance(m, in.summary);
  prov["gold"] = m.gold_path;
  prov["truth"] = m.truth_path;
  r.provenance = std::move(prov);
  detail::ensure_dir(m.out_dir);
  detail::write_file(detail::join_path(m.out_dir, "report.txt"), eval::report_to_text(r));
  detail::write_file(detail::join_path(m.out_dir, "report.json"), eval::report_to_json(r).dump(2) + "\n");
  log << "eval: event recall " << r.event_recall << ", tweet F1 " << r.tweet.f1 << " -> " << m.out_dir << '\n';
  return kExitOk;
}

inline int cmd_inspect(const RunManifest& m, std::ostream& out) {
  const auto in = detail::load_fitted(m);
  const auto& s = in.summary;
  out << "# summary " << s.provenance.dump() << '\n';
  out << "model " << s.model << ", " << s.num_docs() << " documents, " << s.topic_word_counts.size() << " topics, "
      << s.num_samples << " samples\n";
  const auto p = type_proportions(s);
  char buf[160];
  std::snprintf(buf, sizeof buf, "types PublicTG %.4f PublicTS %.4f PersonTG %.4f PersonTS %.4f\n", p[0], p[1], p[2],
                p[3]);
  out << buf;
  std::map<std::int64_t, int> docs;
  for (auto z : s.topics) ++docs[z];
  std::vector<std::pair<int, std::int64_t>> order;
  for (const auto& [id, n] : docs) order.emplace_back(-n, id);
  std::sort(order.begin(), order.end());
  for (const auto& [neg, id] : order) {
    out << "topic " << id << " docs " << -neg << ':';
    for (int w : top_words(s.topic_word_counts.at(id), m.top)) out << ' ' << in.corpus.vocabulary().word(w);
    out << '\n';
  }
  return kExitOk;
}

inline int run_command(const RunManifest& m, std::ostream& out, std::ostream& log) {
  if (m.subcommand == "synth") return cmd_synth(m, log);
  if (m.subcommand == "fit") return cmd_fit(m, log);
  if (m.subcommand == "timeline") return cmd_timeline(m, log);
  if (m.subcommand == "eval") return cmd_eval(m, log);
  if (m.subcommand == "inspect") return cmd_inspect(m, out);
  throw usage_error("unknown subcommand '" + m.subcommand + "'");
}

// Maps exceptions to exit codes.
inline int run_guarded(const RunManifest& m, std::ostream& out, std::ostream& err) {
  try {
    return run_command(m, out, err);
  } catch (const usage_error& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const numerical_error& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const io_error& e) {
    err << "path error: " << e.what() << '\n';
    return kExitData;
  } catch (const data_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

// ---------------------------------------------------------------------------
// Argument parsing

inline int main(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Personal important event timelines from per-user document streams", "pietl"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);
  RunManifest m;

  std::optional<int> burn_in, samples, thin, epoch_days, min_count;
  std::optional<double> eta_x, eta_y, lambda;
  auto sampling_flags = [&](CLI::App* c) {
    c->add_option("--config", m.config_path, "key = value config file")->check(CLI::ExistingFile);
    c->add_option("--burn-in", burn_in, "burn-in sweeps (default 200)");
    c->add_option("--samples", samples, "collected samples (default 100)");
    c->add_option("--thin", thin, "sweeps between samples (default 1)");
    c->add_option("--eta-x", eta_x, "Beta prior on x (default 20)");
    c->add_option("--eta-y", eta_y, "Beta prior on y (default 20)");
    c->add_option("--lambda", lambda, "topic-word Dirichlet prior (default 0.1)");
    c->add_option("--epoch-days", epoch_days, "epoch length in days (default 7)");
    c->add_option("--min-count", min_count, "drop words rarer than this (default 1)");
  };
  auto timeline_flags = [&](CLI::App* c) {
    c->add_option("--corpus", m.corpus_path, "corpus records (JSON lines)")->required();
    c->add_option("--summary", m.summary_path, "posterior summary from fit")->required();
    c->add_option("--mode", m.mode, "ordinary | celebrity")->check(CLI::IsMember({"ordinary", "celebrity"}));
    c->add_option("--names-file", m.names_path, "user_id<TAB>name lines for celebrity mode");
    c->add_option("--shape", m.shape, "celebrity shape test: temporal | lexical")
        ->check(CLI::IsMember({"temporal", "lexical"}));
    c->add_option("--intra", m.intra, "intra-cluster error: neg-log-p | neg-p-log-p")
        ->check(CLI::IsMember({"neg-log-p", "neg-p-log-p"}));
    c->add_option("--top", m.top, "top words per entry (default 10)");
  };

  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus with ground truth");
  synth->add_option("--preset", m.preset, "separable | tiny")->check(CLI::IsMember({"separable", "tiny"}));
  synth->add_option("--seed", m.seed, "generator seed");
  synth->add_option("--out", m.out_dir, "output directory")->required();

  auto* fit = app.add_subcommand("fit", "fit a model and write a posterior summary");
  fit->add_option("--corpus", m.corpus_path, "corpus records (JSON lines)")->required();
  fit->add_option("--model", m.model, "dpm | mlda | person-dp | public-dp")
      ->check(CLI::IsMember({"dpm", "mlda", "person-dp", "public-dp"}));
  fit->add_option("--seed", m.seed, "chain seed");
  fit->add_option("--chains", m.chains, "independent chains run in parallel (seeds seed, seed+1, ...)");
  fit->add_option("--out", m.out_dir, "output directory")->required();
  sampling_flags(fit);

  auto* tl = app.add_subcommand("timeline", "per-user PIE timelines");
  timeline_flags(tl);
  tl->add_option("--user", m.user, "a single user (default: all)");
  tl->add_option("--out", m.out_dir, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "score timelines against gold labels");
  timeline_flags(ev);
  ev->add_option("--gold", m.gold_path, "gold file (user_id, event, doc_id); default: gold_pie fields");
  ev->add_option("--truth", m.truth_path, "synthetic truth sidecar for label accuracy and topic ARI");
  ev->add_option("--out", m.out_dir, "output directory")->required();

  auto* insp = app.add_subcommand("inspect", "topic top words and type proportions");
  insp->add_option("--corpus", m.corpus_path, "corpus records (JSON lines)")->required();
  insp->add_option("--summary", m.summary_path, "posterior summary from fit")->required();
  insp->add_option("--top", m.top, "top words per topic (default 10)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }
  m.subcommand = app.get_subcommands().front()->get_name();
  auto put = [&](const char* key, const auto& v) {
    if (v) {
      std::ostringstream os;
      os.precision(17);
      os << *v;
      m.overrides[key] = os.str();
    }
  };
  put("burn_in", burn_in);
  put("samples", samples);
  put("thin", thin);
  put("eta_x", eta_x);
  put("eta_y", eta_y);
  put("lambda", lambda);
  put("epoch_days", epoch_days);
  put("min_count", min_count);
  return run_guarded(m, out, err);
}

}  // namespace pietl::cli
