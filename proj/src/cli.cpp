#include "srcl/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include "srcl/eval.hpp"
#include "srcl/gradcheck.hpp"
#include "srcl/suite.hpp"
#include "srcl/trainer.hpp"

namespace srcl {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

// Thrown for bad inputs that map to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
};

ExperimentConfig resolve_config(const CommonOptions& opts) {
  ExperimentConfig cfg = opts.config_path.empty() ? default_config() : load_config(opts.config_path);
  for (const auto& o : opts.overrides) apply_override(cfg, o);
  if (opts.seed) {
    cfg.world.seed = *opts.seed;
    cfg.train.seed = *opts.seed;
    cfg.verify.seed = *opts.seed;
  }
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') cfg.out_dir = env;
  return cfg;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << content;
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

fs::path prepare_out_dir(const ExperimentConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  write_file(dir / "config.ini", write_config(cfg));
  return dir;
}

// Collects JSON-lines records, echoing them to the output stream.
class ReportStream {
 public:
  ReportStream(const ExperimentConfig& cfg, std::string command, std::ostream& out)
      : prov_(provenance(cfg, command)), out_(out) {}

  void emit(const std::string& kind, nlohmann::json record) {
    nlohmann::json line{{"kind", kind}};
    for (auto& [k, v] : record.items()) line[k] = v;
    line["provenance"] = prov_;
    const std::string text = line.dump();
    out_ << text << "\n";
    buffer_ << text << "\n";
  }

  std::string text() const { return buffer_.str(); }

 private:
  nlohmann::json prov_;
  std::ostream& out_;
  std::ostringstream buffer_;
};

EncoderPair load_existing_checkpoint(const std::string& path) {
  if (!fs::exists(path)) throw UsageError("checkpoint not found: " + path);
  try {
    return load_checkpoint(path);
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
}

void check_model_fits(const EncoderPair& model, const WorldSpec& world, const std::string& path) {
  if (model.a.dim_in() != world.dim_a || model.b.dim_in() != world.dim_b) {
    throw UsageError("checkpoint " + path + " does not match the world's input dimensions");
  }
}

nlohmann::json retrieval_json(const RetrievalReport& r) {
  nlohmann::json j = to_json(r);
  j["mean_r1"] = r.mean_r1();
  return j;
}

int cmd_verify_bounds(const ExperimentConfig& cfg, const std::string& grid, std::ostream& out, std::ostream& err) {
  SuiteResult result;
  if (grid == "all") {
    result = run_bound_suite(cfg.verify);
  } else if (grid == "eq2") {
    result = run_eq2_grid(cfg.verify);
  } else if (grid == "eq3") {
    result = run_eq3_grid(cfg.verify);
  } else if (grid == "jensen") {
    result = run_jensen_grid(cfg.verify);
  } else {
    result = run_controllability_grid(cfg.verify);
  }
  const fs::path dir = prepare_out_dir(cfg);
  ReportStream stream(cfg, "verify-bounds", out);
  for (const auto& r : result.records) stream.emit("bound", r);
  stream.emit("summary", {{"grid", grid},
                          {"cells", result.records.size()},
                          {"failures", result.failures},
                          {"passed", result.passed()}});
  write_file(dir / "verify_bounds.jsonl", stream.text());
  for (const auto& f : result.failures) err << "FAILED cell " << f << "\n";
  return result.passed() ? kExitOk : kExitFailed;
}

int cmd_gradcheck(const ExperimentConfig& cfg, bool corrupt, std::ostream& out, std::ostream& err) {
  GradcheckOptions opts;
  opts.instances = cfg.verify.gradcheck_instances;
  opts.temperatures = cfg.verify.gradcheck_temperatures;
  opts.seed = cfg.verify.seed;
  opts.corrupt_gradient = corrupt;
  const GradcheckReport report = run_gradcheck(opts);
  const fs::path dir = prepare_out_dir(cfg);
  ReportStream stream(cfg, "gradcheck", out);
  for (const auto& c : report.cells) stream.emit("gradcheck", to_json(c));
  stream.emit("summary", {{"max_rel_error", report.max_rel_error},
                          {"tolerance", opts.tolerance},
                          {"passed", report.passed()}});
  write_file(dir / "gradcheck.jsonl", stream.text());
  for (const auto& c : report.cells) {
    if (!c.passed) err << "FAILED gradcheck " << c.loss << " tau=" << c.temperature << " error=" << c.max_rel_error << "\n";
  }
  return report.passed() ? kExitOk : kExitFailed;
}

std::optional<TeacherHandle> obtain_teacher(const ExperimentConfig& cfg, const std::string& teacher_path,
                                            ReportStream& stream, const fs::path& dir) {
  if (cfg.train.loss != LossKind::srcl) return std::nullopt;
  if (!teacher_path.empty()) {
    EncoderPair model = load_existing_checkpoint(teacher_path);
    check_model_fits(model, cfg.world, teacher_path);
    return TeacherHandle(std::move(model));
  }
  const TeacherResult t = train_teacher(cfg.world.clean(), cfg.teacher_config());
  save_checkpoint(t.teacher.model(), dir / "teacher.ckpt");
  const RetrievalReport val = validation_retrieval(t.teacher.model(), cfg.world, cfg.eval.n_val, cfg.eval.val_salt);
  stream.emit("teacher", {{"final_loss", t.final_loss},
                          {"checksum", t.teacher.checksum()},
                          {"checkpoint", (dir / "teacher.ckpt").string()},
                          {"validation", retrieval_json(val)}});
  return t.teacher;
}

int cmd_train(const ExperimentConfig& cfg, const std::string& teacher_path, std::ostream& out) {
  const fs::path dir = prepare_out_dir(cfg);
  ReportStream stream(cfg, "train", out);
  const std::optional<TeacherHandle> teacher = obtain_teacher(cfg, teacher_path, stream, dir);
  const TrainerState state = train_student(cfg.world, teacher, cfg.train);
  save_checkpoint(state.student, dir / "student.ckpt");
  write_file(dir / "history.csv", history_csv(state.history, provenance_comment(cfg, "train")));
  const RetrievalReport val = validation_retrieval(state.student, cfg.world, cfg.eval.n_val, cfg.eval.val_salt);
  stream.emit("student", {{"loss", to_string(cfg.train.loss)},
                          {"steps", state.step},
                          {"final_loss", state.history.empty() ? 0.0 : state.history.back().loss},
                          {"checksum", checksum(state.student)},
                          {"checkpoint", (dir / "student.ckpt").string()},
                          {"validation", retrieval_json(val)}});
  write_file(dir / "train.jsonl", stream.text());
  return kExitOk;
}

int cmd_eval(const ExperimentConfig& cfg, const std::string& checkpoint, const std::string& teacher_path,
             bool histogram, std::ostream& out) {
  EncoderPair model = load_existing_checkpoint(checkpoint);
  check_model_fits(model, cfg.world, checkpoint);
  std::optional<TeacherHandle> teacher;
  if (!teacher_path.empty()) {
    EncoderPair t = load_existing_checkpoint(teacher_path);
    check_model_fits(t, cfg.world, teacher_path);
    teacher.emplace(std::move(t));
  }
  const fs::path dir = prepare_out_dir(cfg);
  ReportStream stream(cfg, "eval", out);
  const RetrievalReport val = validation_retrieval(model, cfg.world, cfg.eval.n_val, cfg.eval.val_salt);
  stream.emit("retrieval", {{"checkpoint", checkpoint}, {"checksum", checksum(model)}, {"validation", retrieval_json(val)}});
  if (histogram) {
    TrainerState state{model, teacher, {}, {}, cfg.train.steps, {}, cfg.train, cfg.world};
    HistogramOptions opts;
    opts.bins = cfg.eval.histogram_bins;
    opts.w_max = cfg.eval.histogram_max;
    const WeightHistogram h = weight_histogram(state, cfg.world, cfg.eval.histogram_batches, opts);
    nlohmann::json j = to_json(h);
    j["gap"] = h.mean_true_neg - h.mean_false_neg;
    stream.emit("weight_histogram", std::move(j));
  }
  write_file(dir / "eval.jsonl", stream.text());
  return kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg, const std::string& teacher_path, std::ostream& out) {
  if (cfg.train.loss != LossKind::srcl) throw UsageError("sweep needs train.loss = srcl");
  const fs::path dir = prepare_out_dir(cfg);
  ReportStream stream(cfg, "sweep", out);
  const std::optional<TeacherHandle> teacher = obtain_teacher(cfg, teacher_path, stream, dir);
  const TrainerState base{initial_student(cfg.world, cfg.train), teacher, {}, {}, 0, {}, cfg.train, cfg.world};
  SweepOptions opts;
  opts.steps = cfg.eval.sweep_steps;
  opts.n_val = cfg.eval.n_val;
  opts.val_salt = cfg.eval.val_salt;
  const std::vector<SweepPoint> points = threshold_mask_sweep(base, cfg.world, cfg.eval.thresholds, opts);
  std::size_t best = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    stream.emit("sweep_point", {{"threshold", points[i].threshold},
                                {"validation", retrieval_json(points[i].report)},
                                {"skipped_rows", points[i].skipped_rows},
                                {"diverged", points[i].diverged}});
    if (points[i].report.mean_r1() > points[best].report.mean_r1()) best = i;
  }
  stream.emit("sweep_summary", {{"best_threshold", points[best].threshold},
                                {"best_mean_r1", points[best].report.mean_r1()},
                                {"interior_maximum", best > 0 && best + 1 < points.size()}});
  write_file(dir / "sweep.csv", sweep_csv(points, provenance_comment(cfg, "sweep")));
  write_file(dir / "sweep.jsonl", stream.text());
  return kExitOk;
}

}  // namespace

nlohmann::json provenance(const ExperimentConfig& cfg, const std::string& command) {
  return nlohmann::json{{"schema", kReportSchema},
                        {"version", kVersion},
                        {"command", command},
                        {"config_hash", config_hash(cfg)},
                        {"seed", cfg.train.seed},
                        {"world_seed", cfg.world.seed},
                        {"verify_seed", cfg.verify.seed}};
}

std::string provenance_comment(const ExperimentConfig& cfg, const std::string& command) {
  std::ostringstream s;
  s << "provenance schema=" << kReportSchema << " version=" << kVersion << " command=" << command
    << " config_hash=" << config_hash(cfg) << " seed=" << cfg.train.seed << " world_seed=" << cfg.world.seed;
  return s.str();
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Similarity-regulated contrastive learning toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonOptions common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "Experiment config file")->check(CLI::ExistingFile);
    sub->add_option("-s,--set", common.overrides, "Override section.key=value (repeatable)");
    sub->add_option("--seed", common.seed, "Seed for world, training and verification streams");
  };

  auto* verify = app.add_subcommand("verify-bounds", "Mutual-information bound verification grids");
  std::string grid = "all";
  verify->add_option("--grid", grid, "Grid to run")
      ->check(CLI::IsMember({"all", "eq2", "eq3", "jensen", "controllability"}));
  add_common(verify);

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the loss gradients");
  bool corrupt = false;
  grad->add_flag("--corrupt-gradient", corrupt, "Test hook: perturb the analytic gradient");
  add_common(grad);

  std::string teacher_path;
  auto* train = app.add_subcommand("train", "Train the teacher and the student");
  train->add_option("--teacher", teacher_path, "Reuse a teacher checkpoint instead of training one");
  add_common(train);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  std::string checkpoint;
  bool histogram = false;
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();
  eval->add_option("--teacher", teacher_path, "Teacher checkpoint for the weight histogram");
  eval->add_flag("--histogram", histogram, "Also report the regulation-weight histogram");
  add_common(eval);

  auto* sweep = app.add_subcommand("sweep", "Threshold-masking sweep");
  sweep->add_option("--teacher", teacher_path, "Reuse a teacher checkpoint instead of training one");
  add_common(sweep);

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  ExperimentConfig cfg;
  try {
    cfg = resolve_config(common);
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (verify->parsed()) return cmd_verify_bounds(cfg, grid, out, err);
    if (grad->parsed()) return cmd_gradcheck(cfg, corrupt, out, err);
    if (train->parsed()) return cmd_train(cfg, teacher_path, out);
    if (eval->parsed()) return cmd_eval(cfg, checkpoint, teacher_path, histogram, out);
    return cmd_sweep(cfg, teacher_path, out);
  } catch (const TrainingDiverged& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailed;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailed;
  }
}

}  // namespace srcl
