#pragma once

// `qenc` command line: synth, preprocess, encode, bench, report.
// Exit codes: 0 ok, 1 validation/config error, 2 runtime or I/O failure.

#include "qenc/bench.hpp"

#include "CLI11.hpp"

#include <iostream>

namespace qenc::cli {

struct Invocation {
  std::string subcommand;
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> format;
  int verbosity = 0;
  // synth only
  std::optional<std::size_t> rows;
  std::optional<std::size_t> positives;
  // report only
  std::string report_path;
};

namespace detail {

class Log {
public:
  Log(std::ostream& err, int verbosity) : err_(err), verbosity_(verbosity) {}
  void stage(const std::string& msg) const {
    if (verbosity_ > 0)
      err_ << "[qenc] " << msg << "\n";
  }

private:
  std::ostream& err_;
  int verbosity_;
};

inline std::string quoted_json(const std::string& s) { return json(s).dump(); }

/// Flags become ordinary overrides, applied after the user's --set list.
inline ExperimentConfig resolve_config(const Invocation& inv) {
  std::vector<std::string> ov = inv.overrides;
  if (inv.out_dir)
    ov.push_back("output_dir=" + quoted_json(*inv.out_dir));
  if (inv.seed)
    ov.push_back((inv.subcommand == "synth" ? "input.synthetic.seed=" : "seed=") + std::to_string(*inv.seed));
  if (inv.rows)
    ov.push_back("input.synthetic.rows=" + std::to_string(*inv.rows));
  if (inv.positives)
    ov.push_back("input.synthetic.positives=" + std::to_string(*inv.positives));
  return load_config(inv.config_path, ov);
}

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw IoError("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

inline int cmd_synth(const Invocation& inv, std::ostream& out, const Log& log) {
  const ExperimentConfig c = resolve_config(inv);
  const auto dir = ensure_dir(c.output_dir);
  const std::string csv_path = (dir / "churn.csv").string();
  const std::string manifest_path = (dir / "churn.manifest.json").string();
  log.stage("generating " + std::to_string(c.synthetic.rows) + " rows");
  write_churn(csv_path, manifest_path, c.synthetic);
  out << "wrote " << csv_path << " (" << c.synthetic.rows << " rows, " << c.synthetic.positive_count()
      << " positive)\n";
  out << "wrote " << manifest_path << "\n";
  return 0;
}

inline int cmd_preprocess(const Invocation& inv, std::ostream& out, const Log& log) {
  const ExperimentConfig c = resolve_config(inv);
  log.stage("loading and preprocessing");
  const PreparedData data = prepare_data(c, false);
  const auto dir = ensure_dir(c.output_dir);
  const std::string path = (dir / "processed.csv").string();
  csv::write_file(path, csv::format_matrix(data.full));
  const auto& s = data.summary;
  json summary = {{"rows_loaded", s.rows_loaded},
                  {"rows_dropped", s.rows_dropped},
                  {"one_hot_columns", s.one_hot_columns},
                  {"correlation_dropped", s.correlation_dropped},
                  {"vif_dropped", s.vif_dropped},
                  {"rows_after_balance", s.rows_after_balance},
                  {"elbow_index", s.elbow_index ? json(*s.elbow_index) : json(nullptr)},
                  {"components", s.components},
                  {"warnings", s.warnings}};
  csv::write_file((dir / "preprocess.summary.json").string(), summary.dump(2) + "\n");
  out << "rows=" << data.full.rows() << " columns=" << data.full.cols() << " one_hot_columns=" << s.one_hot_columns
      << " vif_dropped=" << s.vif_dropped.size() << " correlation_dropped=" << s.correlation_dropped.size() << "\n";
  out << "wrote " << path << "\n";
  return 0;
}

inline int cmd_encode(const Invocation& inv, std::ostream& out, std::ostream& err, const Log& log) {
  const ExperimentConfig c = resolve_config(inv);
  const auto grid = expand_grid(c);
  log.stage("loading input");
  const PreparedData data = prepare_data(c, false);
  const auto dir = ensure_dir(c.output_dir);
  EncodeOptions opt;
  if (c.key_decimals)
    opt.key_policy = KeyPolicy::rounded(*c.key_decimals);
  opt.threads = std::max(1u, c.threads);
  opt.call_delay = std::chrono::microseconds(c.call_delay_us);
  int status = 0;
  for (const auto& g : grid) {
    const std::string tag =
        g.embedding + "/" + std::string(to_string(g.spec.granularity)) + " " + std::string(to_string(g.strategy));
    try {
      log.stage("encoding " + tag);
      FeatureMatrix m = data.full;
      if (g.spec.kind == EmbeddingKind::basis)
        m = (c.binarize_threshold ? Binarizer::fixed(m.cols(), *c.binarize_threshold) : Binarizer::fit_median(m))
                .transform(m);
      const EncodedDataset e = encode(m, g.spec, g.strategy, opt);
      const std::string path = (dir / ("features." + g.embedding + "." + std::string(to_string(g.spec.granularity)) +
                                        "." + std::string(to_string(g.strategy)) + ".csv"))
                                   .string();
      csv::write_file(path, csv::format_matrix(dataset_features(e, c.readout)));
      out << "embed_calls=" << e.stats.embed_calls << " cache_hits=" << e.stats.cache_hits
          << " cells=" << e.stats.cells_total << " rows=" << e.stats.rows_total
          << " unique_keys=" << e.stats.unique_keys << " embedding=" << g.embedding
          << " granularity=" << to_string(g.spec.granularity) << " strategy=" << to_string(g.strategy) << "\n";
    } catch (const ValidationError& e) {
      err << "qenc encode: " << tag << ": " << e.what() << "\n";
      status = std::max(status, 1);
    } catch (const ConfigError& e) {
      err << "qenc encode: " << tag << ": " << e.what() << "\n";
      status = std::max(status, 1);
    }
  }
  return status;
}

inline int cmd_bench(const Invocation& inv, std::ostream& out, std::ostream& err, const Log& log) {
  const ExperimentConfig c = resolve_config(inv);
  const auto grid = expand_grid(c);
  log.stage("running " + std::to_string(grid.size()) + " grid cells");
  const BenchReport r = run_experiment(c);
  const ReportFormat all[] = {ReportFormat::table, ReportFormat::csv, ReportFormat::jsonl};
  const auto paths = emit_report(r, c.output_dir, all);
  const DeltaSummary deltas = compare_strategies(r, c.accuracy_bound);
  csv::write_file((std::filesystem::path(c.output_dir) / (r.config_hash + ".deltas.csv")).string(),
                  format_deltas_csv(deltas));
  out << format_report(r, parse_report_format(inv.format.value_or("table")));
  for (const auto& cell : r.cells)
    if (!cell.ok)
      err << "qenc bench: cell " << cell.embedding << "/" << to_string(cell.granularity) << " "
          << to_string(cell.strategy) << " failed: " << cell.reason << "\n";
  if (deltas.flagged)
    err << "qenc bench: " << deltas.flagged << " accuracy deltas exceed " << c.accuracy_bound << "\n";
  for (const auto& p : paths)
    log.stage("wrote " + p);
  return 0;
}

inline int cmd_report(const Invocation& inv, std::ostream& out) {
  const BenchReport r = read_report(inv.report_path);
  out << format_report(r, parse_report_format(inv.format.value_or("table")));
  return 0;
}

} // namespace detail

inline void build_app(CLI::App& app, Invocation& inv) {
  app.name("qenc");
  app.description("Redundancy-aware quantum data encoding benchmark");
  app.require_subcommand(1);
  // subcommands inherit this, so global flags may follow the subcommand
  app.fallthrough();
  app.add_option("--config", inv.config_path, "JSON experiment config (defaults apply when omitted)");
  app.add_option("--set", inv.overrides, "Override a config key, e.g. --set preprocess.vif_threshold=10")
      ->type_name("KEY=VALUE")
      ->take_all()
      ->allow_extra_args(false);
  app.add_option("--out", inv.out_dir, "Output directory (config key output_dir)");
  app.add_option("--seed", inv.seed, "Seed (synth: generator seed; otherwise the experiment seed)");
  app.add_option("--format", inv.format, "Rendering for bench/report output")
      ->check(CLI::IsMember({"table", "csv", "jsonl"}));
  app.add_flag("-v,--verbose", inv.verbosity, "Log one line per stage to stderr");

  auto* synth = app.add_subcommand("synth", "Write a seeded synthetic churn CSV and its manifest");
  synth->add_option("--rows", inv.rows, "Row count (default 7043)");
  synth->add_option("--positives", inv.positives, "Positive-class rows (default 1869/7043 of rows)");
  app.add_subcommand("preprocess", "Run the preprocessing pipeline and write processed.csv");
  app.add_subcommand("encode", "Encode the prepared data for every grid entry and write feature CSVs");
  app.add_subcommand("bench", "Run the embedding x strategy grid and write reports");
  auto* report = app.add_subcommand("report", "Render a CSV or JSON-lines report");
  report->add_option("path", inv.report_path, "Report file")->required();
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app;
  Invocation inv;
  build_app(app, inv);
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    // subcommand --help surfaces as CallForHelp from the subcommand
    err << "qenc: " << e.what() << "\n";
    return 1;
  }
  for (auto* sub : app.get_subcommands())
    inv.subcommand = sub->get_name();

  detail::Log log(err, inv.verbosity);
  try {
    if (inv.subcommand == "synth")
      return detail::cmd_synth(inv, out, log);
    if (inv.subcommand == "preprocess")
      return detail::cmd_preprocess(inv, out, log);
    if (inv.subcommand == "encode")
      return detail::cmd_encode(inv, out, err, log);
    if (inv.subcommand == "bench")
      return detail::cmd_bench(inv, out, err, log);
    return detail::cmd_report(inv, out);
  } catch (const ValidationError& e) {
    err << "qenc " << inv.subcommand << ": " << e.what() << "\n";
    return 1;
  } catch (const ConfigError& e) {
    err << "qenc " << inv.subcommand << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "qenc " << inv.subcommand << ": " << e.what() << "\n";
    return 2;
  }
}

} // namespace qenc::cli
