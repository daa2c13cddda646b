/* Copyright 2026 The tinyfuse Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// tinyfuse command-line driver: gen-data, train, distill, search, quantize,
// plan, infer and eval. Every command writes a JSON run report.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tinyfuse/container.hpp"
#include "tinyfuse/dataset.hpp"
#include "tinyfuse/distill.hpp"
#include "tinyfuse/graph_json.hpp"
#include "tinyfuse/int8_engine.hpp"
#include "tinyfuse/memory.hpp"
#include "tinyfuse/quant.hpp"
#include "tinyfuse/reference_archs.hpp"
#include "tinyfuse/report.hpp"
#include "tinyfuse/search_space.hpp"
#include "tinyfuse/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tinyfuse;

namespace {

constexpr int kExitUsage = 2;

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return 3;
    case ErrorCode::kInvalidGraph: return 4;
    case ErrorCode::kShapeMismatch: return 5;
    case ErrorCode::kNumeric: return 6;
    case ErrorCode::kDiverged: return 7;
    case ErrorCode::kIo: return 8;
    case ErrorCode::kFormat: return 9;
    case ErrorCode::kChecksum: return 10;
    case ErrorCode::kDoesNotFit: return 11;
  }
  return 1;
}

struct Settings {
  std::string config;
  std::uint64_t seed = 0;
  std::string out;
  bool pretty = false;
  std::size_t threads = 0;

  std::string preset = "audio3";
  std::string data;
  std::string graph;
  std::string modalities;
  std::string model;
  std::string teacher;
  std::string model_out;
  std::string space;
  std::string profile = "gap8";
  std::string split = "test";

  int epochs = 10;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double temperature = 4.0;
  double alpha = 0.1;
  bool literal = false;
  std::uint64_t budget_bytes = 0;
  std::size_t calibration_samples = kDefaultCalibrationSamples;
  std::uint64_t activation_bytes = 0;
  std::uint64_t weight_bytes = 0;
  std::uint64_t ops = 0;
  bool no_inplace_relu = false;
  std::size_t count = 8;
  std::size_t start = 0;
};

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

fs::path manifest_path(const std::string& data) {
  if (data.empty()) fail(ErrorCode::kInvalidArgument, "--data is required");
  fs::path p(data);
  if (fs::is_directory(p)) p /= "manifest.json";
  if (!fs::exists(p)) fail(ErrorCode::kIo, "dataset manifest '" + p.string() + "' not found");
  return p;
}

Dataset load_data(const Settings& s, RunReport& report) {
  Stopwatch t;
  Dataset d = load_dataset(manifest_path(s.data));
  report.add_timing("load_data", t.ms());
  json modalities = json::array();
  for (const auto& m : d.modalities) modalities.push_back(m.name);
  report["dataset"] = {{"fingerprint", d.fingerprint()},
                       {"num_classes", d.num_classes},
                       {"sample_count", d.size()},
                       {"split_sizes",
                        {{"train", d.train.size()},
                         {"validation", d.validation.size()},
                         {"test", d.test.size()}}},
                       {"modalities", modalities}};
  return d;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

const SyntheticTaskSpec& require_task(const Dataset& d) {
  if (!d.task) {
    fail(ErrorCode::kInvalidArgument,
         "dataset carries no task description; pass --graph explicitly");
  }
  return *d.task;
}

void require(const std::string& value, const char* flag) {
  if (value.empty()) fail(ErrorCode::kInvalidArgument, std::string(flag) + " is required");
}

TrainConfig train_config(const Settings& s) {
  TrainConfig c;
  c.epochs = s.epochs;
  c.batch_size = s.batch_size;
  c.learning_rate = s.learning_rate;
  c.seed = s.seed;
  c.threads = s.threads;
  return c;
}

void record_sizes(RunReport& report, const Graph& g, const ShapeMap& shapes) {
  report["model_sizes"]["params"] = param_count(g, shapes).total;
  report["model_sizes"]["float_bytes"] = model_size_bytes(g, shapes, Precision::kFloat32);
  report["model_sizes"]["int8_bytes"] = model_size_bytes(g, shapes, Precision::kInt8);
  const NodeCounts ops = op_count(g, shapes);
  json per_node = json::object();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    if (ops.per_node[i] > 0) per_node[g.nodes[i].name] = ops.per_node[i];
  }
  report["op_counts"] = {{"total_ops", ops.total}, {"per_node", per_node}};
}

void record_training(RunReport& report, const TrainResult& r) {
  report["training"] = {{"best_epoch", r.best_epoch}, {"trace", trace_to_json(r.trace)}};
}

// Saves, reloads and re-serializes the model; records the artifact and
// whether the second serialization is byte-identical.
template <typename Model>
void save_checked(const Model& model, const std::string& path, RunReport& report) {
  require(path, "--model-out");
  Stopwatch t;
  save_model(model, path);
  const std::string first = serialize_model(model);
  const AnyModel back = load_model(path);
  const std::string second =
      std::visit([](const auto& m) { return serialize_model(m); }, back);
  const bool same = first == second;
  json& a = report.add_artifact("model", path);
  a["round_trip_identical"] = same;
  report["model_sizes"]["container_bytes"] = first.size();
  report.add_timing("save_model", t.ms());
  if (!same) {
    report.add_error(ErrorCode::kFormat, "container round trip of '" + path +
                                             "' is not byte-identical");
  }
}

// ---------------------------------------------------------------------------

void cmd_gen_data(const Settings& s, RunReport& report) {
  require(s.data, "--data");
  const SyntheticTaskSpec task = task_preset(s.preset);
  report["config"]["task"] = task_to_json(task);
  Stopwatch t;
  const Dataset d = generate(task, s.seed);
  report.add_timing("generate", t.ms());
  Stopwatch w;
  const fs::path manifest = save_dataset(d, s.data);
  report.add_timing("save", w.ms());
  json modalities = json::array();
  for (const auto& m : d.modalities) modalities.push_back(m.name);
  report["dataset"] = {{"fingerprint", d.fingerprint()},
                       {"num_classes", d.num_classes},
                       {"sample_count", d.size()},
                       {"split_sizes",
                        {{"train", d.train.size()},
                         {"validation", d.validation.size()},
                         {"test", d.test.size()}}},
                       {"modalities", modalities}};
  report.add_artifact("manifest", manifest);
}

void cmd_train(const Settings& s, RunReport& report) {
  const Dataset d = load_data(s, report);
  Graph g = s.graph.empty() ? reference_teacher(require_task(d)) : load_graph(s.graph);
  const auto mods = split_list(s.modalities);
  if (mods.size() == 1) {
    g = unimodal_variant(g, mods[0]);
  } else if (!mods.empty()) {
    const std::string name = g.name;
    g = restrict_to_modalities(g, mods);
    g.name = name + "_" + s.modalities;
  }
  const TrainConfig cfg = train_config(s);
  report["config"]["train"] = cfg.to_json();
  report["config"]["graph"] = g.name;
  FloatModel init = make_model(g, s.seed);
  record_sizes(report, g, init.shapes);
  Stopwatch t;
  const TrainResult r = train(std::move(init), d, cfg);
  report.add_timing("train", t.ms());
  record_training(report, r);
  const double acc = evaluate(r.model, d, Split::kTest, s.threads).accuracy;
  const auto inputs = g.input_names();
  if (inputs.size() == 1) {
    report["accuracies"]["per_modality"][inputs[0]] = acc;
  } else {
    report["accuracies"]["multimodal"] = acc;
  }
  save_checked(r.model, s.model_out, report);
}

void cmd_distill(const Settings& s, RunReport& report) {
  require(s.teacher, "--teacher");
  const Dataset d = load_data(s, report);
  const FloatModel teacher = load_float_model(s.teacher);
  const std::string teacher_sum = parameter_checksum(teacher);
  const Graph student = s.graph.empty() ? reference_student(require_task(d)) : load_graph(s.graph);
  DistillConfig cfg;
  cfg.temperature = s.temperature;
  cfg.alpha = s.alpha;
  cfg.literal_student_temperature = s.literal;
  cfg.train = train_config(s);
  report["config"]["distill"] = cfg.to_json();
  report["config"]["student_graph"] = student.name;
  Stopwatch t;
  const TrainResult r = distill(teacher, student, d, cfg);
  report.add_timing("distill", t.ms());
  if (parameter_checksum(teacher) != teacher_sum) {
    report.add_error(ErrorCode::kNumeric, "teacher parameters changed during distillation");
  }
  record_training(report, r);
  record_sizes(report, r.model.graph, r.model.shapes);
  const auto teacher_bytes = model_size_bytes(teacher.graph, teacher.shapes, Precision::kFloat32);
  report["model_sizes"]["teacher_float_bytes"] = teacher_bytes;
  report["model_sizes"]["size_reduction"] =
      static_cast<double>(teacher_bytes) /
      static_cast<double>(model_size_bytes(r.model.graph, r.model.shapes, Precision::kInt8));
  report["accuracies"]["teacher"] = evaluate(teacher, d, Split::kTest, s.threads).accuracy;
  report["accuracies"]["distilled"] = evaluate(r.model, d, Split::kTest, s.threads).accuracy;
  save_checked(r.model, s.model_out, report);
}

void cmd_search(const Settings& s, RunReport& report) {
  require(s.teacher, "--teacher");
  const Dataset d = load_data(s, report);
  const FloatModel teacher = load_float_model(s.teacher);
  const Graph templ = s.graph.empty() ? reference_student(require_task(d)) : load_graph(s.graph);
  const ArchSearchSpace space = s.space.empty() ? reference_search_space(require_task(d))
                                                : search_space_from_json(read_json_file(s.space));
  const HardwareProfile profile = load_profile(s.profile);
  const std::uint64_t teacher_bytes =
      model_size_bytes(teacher.graph, teacher.shapes, Precision::kFloat32);
  const std::uint64_t budget = s.budget_bytes > 0 ? s.budget_bytes : teacher_bytes / 25;
  DistillConfig cfg;
  cfg.temperature = s.temperature;
  cfg.alpha = s.alpha;
  cfg.literal_student_temperature = s.literal;
  cfg.train = train_config(s);
  report["config"]["distill"] = cfg.to_json();
  report["config"]["space"] = search_space_to_json(space);
  report["config"]["profile"] = profile.name;
  Stopwatch t;
  const SearchResult r =
      memory_aware_search(teacher, enumerate_candidates(space, templ), budget, profile, d, cfg);
  report.add_timing("search", t.ms());
  json sj = r.to_json();
  sj["table"] = r.table();
  report["search"] = sj;
  report["accuracies"]["teacher"] = r.teacher_test_accuracy;
  const auto sel = r.selected();
  if (!sel) {
    report.add_error(ErrorCode::kDoesNotFit,
                     "no candidate fits " + std::to_string(budget) + " bytes on " + profile.name);
    return;
  }
  const FloatModel& best = r.models[*sel];
  record_sizes(report, best.graph, best.shapes);
  report["model_sizes"]["teacher_float_bytes"] = teacher_bytes;
  report["model_sizes"]["size_reduction"] =
      static_cast<double>(teacher_bytes) / static_cast<double>(r.candidates[*sel].int8_bytes);
  report["accuracies"]["distilled"] = r.candidates[*sel].test_accuracy;
  if (!s.model_out.empty()) save_checked(best, s.model_out, report);
}

void cmd_quantize(const Settings& s, RunReport& report) {
  require(s.model, "--model");
  const Dataset d = load_data(s, report);
  const FloatModel model = load_float_model(s.model);
  if (s.calibration_samples == 0) {
    fail(ErrorCode::kInvalidArgument, "--calibration-samples must be >= 1");
  }
  const std::size_t n = std::min(s.calibration_samples, d.train.size());
  report["config"]["calibration_samples"] = n;
  Stopwatch t;
  const CalibrationStats stats = calibrate(
      model, d, std::vector<std::size_t>(d.train.begin(), d.train.begin() + n), s.threads);
  const QuantizedModel q = quantize_model(model, stats);
  report.add_timing("quantize", t.ms());
  record_sizes(report, model.graph, model.shapes);
  Stopwatch e;
  const Evaluation fe = evaluate(model, d, Split::kTest, s.threads);
  const Int8Evaluation qe = evaluate_int8(q, d, Split::kTest, s.threads);
  report.add_timing("evaluate", e.ms());
  std::size_t agree = 0;
  for (std::size_t i = 0; i < fe.predictions.size(); ++i) {
    agree += fe.predictions[i] == qe.predictions[i];
  }
  report["accuracies"]["float"] = fe.accuracy;
  report["accuracies"]["quantized"] = qe.accuracy;
  report["accuracies"]["top1_agreement"] =
      static_cast<double>(agree) / static_cast<double>(fe.predictions.size());
  save_checked(q, s.model_out, report);
}

void cmd_plan(const Settings& s, RunReport& report) {
  const HardwareProfile profile = load_profile(s.profile);
  report["config"]["profile"] = profile_to_json(profile);
  PlanRequest req;
  std::uint64_t ops = s.ops;
  if (!s.model.empty()) {
    const AnyModel m = load_model(s.model);
    const bool int8 = std::holds_alternative<QuantizedModel>(m);
    const Graph& g = int8 ? std::get<QuantizedModel>(m).graph : std::get<FloatModel>(m).graph;
    const ShapeMap& shapes =
        int8 ? std::get<QuantizedModel>(m).shapes : std::get<FloatModel>(m).shapes;
    LivenessOptions opt;
    opt.inplace_relu = !s.no_inplace_relu;
    req = plan_request(g, shapes, int8 ? Precision::kInt8 : Precision::kFloat32, opt);
    record_sizes(report, g, shapes);
    ops = op_count(g, shapes).total;
    report["config"]["precision"] = int8 ? "int8" : "float32";
    report["config"]["inplace_relu"] = opt.inplace_relu;
  } else {
    if (s.activation_bytes == 0 && s.weight_bytes == 0) {
      fail(ErrorCode::kInvalidArgument,
           "plan needs --model or --activation-bytes/--weight-bytes");
    }
    req.activation_peak_bytes = s.activation_bytes;
    if (s.weight_bytes > 0) req.weights.push_back({"weights", s.weight_bytes});
    report["config"]["activation_bytes"] = s.activation_bytes;
    report["config"]["weight_bytes"] = s.weight_bytes;
  }
  Stopwatch t;
  const MemoryPlan p = plan(req, profile);
  report.add_timing("plan", t.ms());
  report["fit_report"] = p.to_json();
  if (!s.model.empty() || s.ops > 0) {
    const LatencyEstimate est = latency_estimate(ops, profile, p);
    report["latency_estimate"] = {{"label", est.label},
                                  {"milliseconds", est.milliseconds},
                                  {"penalty", est.penalty},
                                  {"profile", profile.name}};
  }
}

Split parse_split_flag(const std::string& name) { return parse_split(name); }

void cmd_infer(const Settings& s, RunReport& report) {
  require(s.model, "--model");
  const Dataset d = load_data(s, report);
  const AnyModel m = load_model(s.model);
  const auto& samples = d.split(parse_split_flag(s.split));
  if (s.start >= samples.size()) {
    fail(ErrorCode::kInvalidArgument, "--start is past the end of the " + s.split + " split");
  }
  const std::size_t end = std::min(samples.size(), s.start + s.count);
  json rows = json::array();
  std::size_t correct = 0;
  Stopwatch t;
  const bool int8 = std::holds_alternative<QuantizedModel>(m);
  for (std::size_t i = s.start; i < end; ++i) {
    const std::size_t idx = samples[i];
    std::vector<float> probs;
    if (int8) {
      const auto& q = std::get<QuantizedModel>(m);
      probs = infer_int8(q, quantize_sample(q, d, idx)).probabilities;
    } else {
      const auto& f = std::get<FloatModel>(m);
      const InputBinder binder(f.graph, f.shapes, d);
      std::vector<FloatTensor> inputs;
      binder.gather(d, idx, inputs);
      const auto acts = forward<float>(f, std::span<const FloatTensor>(inputs));
      const auto p = acts.probabilities();
      probs.assign(p.begin(), p.end());
    }
    const auto pred = static_cast<int>(argmax<float>(probs));
    correct += pred == d.labels[idx];
    rows.push_back({{"index", idx}, {"label", d.labels[idx]}, {"predicted", pred},
                    {"probabilities", probs}});
  }
  report.add_timing("infer", t.ms());
  report["inference"] = {{"precision", int8 ? "int8" : "float32"}, {"samples", rows}};
  const double acc = static_cast<double>(correct) / static_cast<double>(end - s.start);
  report["accuracies"][int8 ? "quantized" : "float"] = acc;
}

void cmd_eval(const Settings& s, RunReport& report) {
  require(s.model, "--model");
  const Dataset d = load_data(s, report);
  const AnyModel m = load_model(s.model);
  const Split split = parse_split_flag(s.split);
  Stopwatch t;
  if (const auto* q = std::get_if<QuantizedModel>(&m)) {
    const Int8Evaluation ev = evaluate_int8(*q, d, split, s.threads);
    report["evaluation"] = {{"split", s.split},
                            {"precision", "int8"},
                            {"total", ev.total},
                            {"accuracy", ev.accuracy}};
    report["accuracies"]["quantized"] = ev.accuracy;
    record_sizes(report, q->graph, q->shapes);
  } else {
    const auto& f = std::get<FloatModel>(m);
    const Evaluation ev = evaluate(f, d, split, s.threads);
    report["evaluation"] = {{"split", s.split},
                            {"precision", "float32"},
                            {"total", ev.total},
                            {"accuracy", ev.accuracy},
                            {"confusion", ev.confusion}};
    report["accuracies"]["float"] = ev.accuracy;
    record_sizes(report, f.graph, f.shapes);
  }
  report.add_timing("evaluate", t.ms());
}

// ---------------------------------------------------------------------------

void add_common(CLI::App* app, Settings& s) {
  app->add_option("--config", s.config, "JSON file of option values (flags override it)");
  app->add_option("--seed", s.seed, "Seed for every random choice");
  app->add_option("--out", s.out, "Write the JSON run report here instead of stdout");
  app->add_flag("--pretty", s.pretty, "Print human-readable tables");
  app->add_option("--threads", s.threads, "Worker threads (0 = all cores)");
}

void add_training(CLI::App* app, Settings& s) {
  app->add_option("--epochs", s.epochs, "Training epochs");
  app->add_option("--batch-size", s.batch_size, "Mini-batch size");
  app->add_option("--learning-rate", s.learning_rate, "Adam learning rate");
}

void add_distill(CLI::App* app, Settings& s) {
  app->add_option("--temperature", s.temperature, "Softening temperature T");
  app->add_option("--alpha", s.alpha, "Hard-label cross-entropy weight");
  app->add_flag("--literal-student-temperature", s.literal,
                "Compare soft targets with the student's T=1 probabilities");
}

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number() || v.is_null()) return v.dump();
  fail(ErrorCode::kInvalidArgument, "config values must be scalars, got " + v.dump());
}

// Fills options not given on the command line from the config file.
void apply_config(CLI::App* app, const Settings& s, RunReport& report) {
  if (s.config.empty()) return;
  const json cfg = read_json_file(s.config);
  if (!cfg.is_object()) {
    fail(ErrorCode::kInvalidArgument, "config file '" + s.config + "' must hold a JSON object");
  }
  for (const auto& [key, value] : cfg.items()) {
    CLI::Option* opt = app->get_option_no_throw("--" + key);
    if (opt == nullptr || key == "config") {
      fail(ErrorCode::kInvalidArgument, "config file '" + s.config + "': unknown key '" + key +
                                            "' for command " + app->get_name());
    }
    if (opt->count() == 0) {
      opt->add_result(scalar_text(value));
      opt->run_callback();
    }
  }
  report["config"]["config_file"] = s.config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tinyfuse: multimodal fusion training, distillation, int8 quantization and "
               "memory planning for microcontroller-class targets"};
  app.require_subcommand(1);
  Settings s;

  using Handler = std::function<void(const Settings&, RunReport&)>;
  std::vector<std::pair<CLI::App*, Handler>> commands;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic multimodal dataset");
  add_common(gen, s);
  gen->add_option("--preset", s.preset, "Task preset (audio3, image2)");
  gen->add_option("--data", s.data, "Output directory");
  commands.emplace_back(gen, cmd_gen_data);

  auto* tr = app.add_subcommand("train", "Train a float model with cross-entropy");
  add_common(tr, s);
  add_training(tr, s);
  tr->add_option("--data", s.data, "Dataset directory or manifest");
  tr->add_option("--graph", s.graph, "Graph JSON (default: reference teacher)");
  tr->add_option("--modalities", s.modalities, "Comma-separated subset of input modalities");
  tr->add_option("--model-out", s.model_out, "Output model container");
  commands.emplace_back(tr, cmd_train);

  auto* di = app.add_subcommand("distill", "Distill a teacher into a student graph");
  add_common(di, s);
  add_training(di, s);
  add_distill(di, s);
  di->add_option("--data", s.data, "Dataset directory or manifest");
  di->add_option("--teacher", s.teacher, "Teacher model container");
  di->add_option("--graph", s.graph, "Student graph JSON (default: reference student)");
  di->add_option("--model-out", s.model_out, "Output model container");
  commands.emplace_back(di, cmd_distill);

  auto* se = app.add_subcommand("search", "Memory-aware student search with distillation");
  add_common(se, s);
  add_training(se, s);
  add_distill(se, s);
  se->add_option("--data", s.data, "Dataset directory or manifest");
  se->add_option("--teacher", s.teacher, "Teacher model container");
  se->add_option("--graph", s.graph, "Student template graph JSON");
  se->add_option("--space", s.space, "Search space JSON");
  se->add_option("--budget-bytes", s.budget_bytes,
                 "int8 size budget (default: teacher float size / 25)");
  se->add_option("--profile", s.profile, "Hardware profile name or JSON file");
  se->add_option("--model-out", s.model_out, "Container for the selected student");
  commands.emplace_back(se, cmd_search);

  auto* qu = app.add_subcommand("quantize", "Post-training int8 quantization");
  add_common(qu, s);
  qu->add_option("--data", s.data, "Dataset directory or manifest (calibration + test)");
  qu->add_option("--model", s.model, "Float model container");
  qu->add_option("--calibration-samples", s.calibration_samples, "Calibration sample count");
  qu->add_option("--model-out", s.model_out, "Output int8 container");
  commands.emplace_back(qu, cmd_quantize);

  auto* pl = app.add_subcommand("plan", "Memory placement and fit report");
  add_common(pl, s);
  pl->add_option("--model", s.model, "Model container (float or int8)");
  pl->add_option("--profile", s.profile, "Hardware profile name or JSON file");
  pl->add_option("--activation-bytes", s.activation_bytes, "Activation peak, without a model");
  pl->add_option("--weight-bytes", s.weight_bytes, "Weight bytes, without a model");
  pl->add_option("--ops", s.ops, "Operation count for the latency estimate, without a model");
  pl->add_flag("--no-inplace-relu", s.no_inplace_relu, "Give every ReLU its own buffer");
  commands.emplace_back(pl, cmd_plan);

  auto* in = app.add_subcommand("infer", "Run inference on dataset samples");
  add_common(in, s);
  in->add_option("--model", s.model, "Model container (float or int8)");
  in->add_option("--data", s.data, "Dataset directory or manifest");
  in->add_option("--split", s.split, "train, validation or test");
  in->add_option("--start", s.start, "First position within the split");
  in->add_option("--count", s.count, "Number of samples");
  commands.emplace_back(in, cmd_infer);

  auto* ev = app.add_subcommand("eval", "Accuracy of a model on a dataset split");
  add_common(ev, s);
  ev->add_option("--model", s.model, "Model container (float or int8)");
  ev->add_option("--data", s.data, "Dataset directory or manifest");
  ev->add_option("--split", s.split, "train, validation or test");
  commands.emplace_back(ev, cmd_eval);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  CLI::App* active = nullptr;
  Handler handler;
  for (auto& [sub, h] : commands) {
    if (sub->parsed()) {
      active = sub;
      handler = h;
    }
  }
  RunReport report(active->get_name());
  int code = 0;
  Stopwatch total;
  try {
    apply_config(active, s, report);
    report.set_seed("seed", s.seed);
    handler(s, report);
  } catch (const Error& e) {
    report.add_error(e.code(), e.what());
    code = exit_code(e.code());
  } catch (const std::exception& e) {
    report.add_error(ErrorCode::kIo, e.what());
    code = 1;
  }
  report.add_timing("total", total.ms());
  if (code == 0 && !report.ok()) code = 1;

  const json j = report.to_json();
  if (!s.out.empty()) {
    try {
      write_text_file(s.out, j.dump(2) + "\n");
    } catch (const Error& e) {
      std::cerr << "error: " << e.what() << "\n";
      return exit_code(e.code());
    }
  }
  if (s.pretty) {
    std::cout << report.pretty();
  } else if (s.out.empty()) {
    std::cout << j.dump(2) << "\n";
  }
  for (const auto& e : j["errors"]) {
    std::cerr << "error [" << e["code"].get<std::string>() << "]: "
              << e["message"].get<std::string>() << "\n";
  }
  return code;
}
