// egoflow command line front end.
//
// One subcommand per pipeline stage: synthesize or import data, extract
// per-cell flow, stack volumes, train/transfer models, then classify,
// segment, evaluate, or inspect what the first layer learned.  Subcommands
// print a single JSON summary line to stdout (or JSON lines where the
// product is per-item); progress and diagnostics go to stderr.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "egoflow/egoflow.hpp"
#include "json.hpp"

namespace {

using nlohmann::json;

std::vector<std::string> split_names(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const std::size_t end = comma == std::string::npos ? csv.size() : comma;
    out.push_back(csv.substr(start, end - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw egoflow::Error(egoflow::ErrorKind::missing_input,
                                 "cannot open '" + path + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw egoflow::Error(egoflow::ErrorKind::missing_input,
                                 "short write to '" + path + "'");
}

void emit(const json& j) { std::printf("%s\n", j.dump().c_str()); }

// ---------------------------------------------------------------------------
// Shared option bundles

struct TrainOpts {
  std::string volumes;
  std::string labels_csv;
  std::string out;
  double lr = 0.01;
  int batch = 64;
  int iterations = 3000;
  std::uint64_t seed = 0;
  int threads = 0;
  int progress_every = 100;
  std::string loss_out;
};

void add_train_opts(CLI::App* cmd, TrainOpts& o) {
  cmd->add_option("--volumes", o.volumes, "labeled volume dataset (EGVD)")
      ->required();
  cmd->add_option("--labels", o.labels_csv,
                  "comma separated class names; label k maps to the k-th name")
      ->required();
  cmd->add_option("--out", o.out, "model file to write (EGNT)")->required();
  cmd->add_option("--lr", o.lr, "SGD learning rate");
  cmd->add_option("--batch", o.batch, "minibatch size");
  cmd->add_option("--iterations", o.iterations, "SGD iterations");
  cmd->add_option("--seed", o.seed, "RNG seed (init + sampling)");
  cmd->add_option("--threads", o.threads,
                  "worker threads; 0 = EGOFLOW_THREADS env or hardware");
  cmd->add_option("--progress-every", o.progress_every,
                  "print loss to stderr every N iterations; 0 = quiet");
  cmd->add_option("--loss-out", o.loss_out, "write per-iteration loss CSV here");
}

egoflow::TrainConfig make_train_config(const TrainOpts& o,
                                       std::vector<double>* history) {
  egoflow::TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.batch_size = o.batch;
  cfg.iterations = o.iterations;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.loss_history = history;
  if (o.progress_every > 0) {
    const int every = o.progress_every;
    const int total = o.iterations;
    cfg.on_progress = [every, total](int iter, double loss) {
      if ((iter + 1) % every == 0 || iter + 1 == total) {
        std::fprintf(stderr, "iter %d/%d  loss %.6f\n", iter + 1, total, loss);
      }
    };
  }
  return cfg;
}

void maybe_write_loss(const TrainOpts& o, const std::vector<double>& history) {
  if (o.loss_out.empty()) return;
  std::string csv = "iteration,loss\n";
  for (std::size_t i = 0; i < history.size(); ++i) {
    csv += std::to_string(i) + "," + std::to_string(history[i]) + "\n";
  }
  write_text_file(o.loss_out, csv);
}

json report_to_json(const egoflow::EvaluationReport& report) {
  json per = json::array();
  for (const egoflow::ClassMetrics& m : report.per_class) {
    per.push_back({{"label", m.label},
                   {"precision", m.precision},
                   {"recall", m.recall},
                   {"f1", m.f1},
                   {"support", m.support}});
  }
  return json{{"accuracy", report.accuracy},
              {"macro_precision", report.macro_precision},
              {"macro_recall", report.macro_recall},
              {"macro_f1", report.macro_f1},
              {"total", report.total},
              {"per_class", per},
              {"confusion", report.confusion}};
}

json timeline_to_json(const egoflow::ActivityTimeline& timeline,
                      const std::vector<std::string>& labels) {
  json segs = json::array();
  for (const egoflow::TimelineSegment& s : timeline.segments) {
    json seg{{"start_s", s.start_s},
             {"end_s", s.end_s},
             {"class_id", s.class_id},
             {"mean_score", s.mean_score}};
    if (s.class_id >= 0 && static_cast<std::size_t>(s.class_id) < labels.size()) {
      seg["class"] = labels[static_cast<std::size_t>(s.class_id)];
    }
    segs.push_back(seg);
  }
  return json{{"segments", segs}};
}

// ---------------------------------------------------------------------------
// Subcommand bodies

struct SynthOpts {
  std::string out;
  int per_class = 10;
  double noise_ratio = 0.2;
  std::uint64_t seed = 0;
  std::string classes_csv;
};

int run_synth(const SynthOpts& o) {
  std::vector<egoflow::MotionClassSpec> classes =
      egoflow::default_motion_classes(o.noise_ratio, o.seed);
  if (!o.classes_csv.empty()) {
    std::vector<egoflow::MotionClassSpec> picked;
    for (const std::string& name : split_names(o.classes_csv)) {
      bool found = false;
      for (const egoflow::MotionClassSpec& spec : classes) {
        if (spec.name == name) {
          picked.push_back(spec);
          found = true;
          break;
        }
      }
      if (!found) {
        throw egoflow::Error(egoflow::ErrorKind::usage,
                             "unknown motion class '" + name + "'");
      }
    }
    classes = std::move(picked);
  }
  std::vector<egoflow::FlowVolume> volumes =
      egoflow::generate_dataset(classes, o.per_class);
  egoflow::write_volume_dataset(o.out, volumes);
  json names = json::array();
  for (const egoflow::MotionClassSpec& spec : classes) names.push_back(spec.name);
  emit({{"command", "synth"},
        {"volumes", volumes.size()},
        {"per_class", o.per_class},
        {"classes", names},
        {"out", o.out}});
  return 0;
}

struct ImportOpts {
  std::string dir;
  double fps = 0.0;
  std::string out;
};

int run_import_frames(const ImportOpts& o) {
  const std::vector<egoflow::Frame> frames = egoflow::load_frame_dir(o.dir, o.fps);
  egoflow::write_frame_file(o.out, frames, o.fps);
  emit({{"command", "import-frames"},
        {"frames", frames.size()},
        {"fps", o.fps},
        {"out", o.out}});
  return 0;
}

struct ExtractOpts {
  std::string frames_file;
  std::string frames_dir;
  double fps = 0.0;
  std::string out;
  int threads = 0;
  int lk_iterations = 20;
  double lk_epsilon = 0.01;
  bool no_fill = false;
};

int run_extract_flow(const ExtractOpts& o) {
  std::vector<egoflow::Frame> frames;
  double native_fps = 0.0;
  if (!o.frames_file.empty()) {
    egoflow::FrameSequence seq = egoflow::read_frame_file(o.frames_file);
    frames = std::move(seq.frames);
    native_fps = seq.native_fps;
  } else if (!o.frames_dir.empty()) {
    if (!(o.fps > 0.0)) {
      throw egoflow::Error(egoflow::ErrorKind::usage,
                           "--fps is required with --frames-dir");
    }
    frames = egoflow::load_frame_dir(o.frames_dir, o.fps);
    native_fps = o.fps;
  } else {
    throw egoflow::Error(egoflow::ErrorKind::usage,
                         "one of --frames or --frames-dir is required");
  }

  const std::vector<egoflow::Frame> resampled =
      egoflow::resample_to_15fps(frames, native_fps);
  egoflow::LkConfig lk;
  lk.max_iterations = o.lk_iterations;
  lk.epsilon = o.lk_epsilon;
  std::vector<egoflow::FlowField> fields =
      egoflow::extract_flow_sequence(resampled, lk, o.threads);

  std::size_t failed_cells = 0;
  for (const egoflow::FlowField& f : fields) {
    for (std::uint8_t c : f.converged) failed_cells += c ? 0 : 1;
  }
  if (!o.no_fill) fields = egoflow::interpolate_failures(std::move(fields));
  egoflow::write_flow_file(o.out, fields);
  emit({{"command", "extract-flow"},
        {"input_frames", frames.size()},
        {"resampled_frames", resampled.size()},
        {"fields", fields.size()},
        {"failed_cells", failed_cells},
        {"filled", !o.no_fill},
        {"out", o.out}});
  return 0;
}

struct BuildOpts {
  std::string flow;
  std::string out;
  int label = -1;
};

int run_build_volumes(const BuildOpts& o) {
  const std::vector<egoflow::FlowField> fields = egoflow::read_flow_file(o.flow);
  std::vector<egoflow::FlowVolume> volumes = egoflow::build_volumes(fields);
  for (egoflow::FlowVolume& v : volumes) v.label = o.label;
  egoflow::write_volume_dataset(o.out, volumes);
  emit({{"command", "build-volumes"},
        {"fields", fields.size()},
        {"volumes", volumes.size()},
        {"label", o.label},
        {"out", o.out}});
  return 0;
}

int run_fit_norm(const std::string& volumes_path) {
  const std::vector<egoflow::FlowVolume> volumes =
      egoflow::read_volume_dataset(volumes_path);
  const egoflow::NormStats stats = egoflow::fit_norm_stats(volumes);
  emit({{"command", "fit-norm"},
        {"volumes", volumes.size()},
        {"p95_u", stats.p95_u},
        {"p95_v", stats.p95_v}});
  return 0;
}

int run_train(const TrainOpts& o) {
  const std::vector<egoflow::FlowVolume> volumes =
      egoflow::read_volume_dataset(o.volumes);
  const std::vector<std::string> labels = split_names(o.labels_csv);
  std::vector<double> history;
  egoflow::TrainConfig cfg = make_train_config(o, &history);
  const egoflow::NetworkModel model = egoflow::train(volumes, labels, cfg);
  egoflow::save_model(o.out, model);
  maybe_write_loss(o, history);
  emit({{"command", "train"},
        {"volumes", volumes.size()},
        {"classes", labels.size()},
        {"iterations", o.iterations},
        {"final_loss", history.empty() ? json(nullptr) : json(history.back())},
        {"p95_u", model.norm_stats.p95_u},
        {"p95_v", model.norm_stats.p95_v},
        {"out", o.out}});
  return 0;
}

struct TransferOpts {
  TrainOpts train;
  std::string base;
  std::string mode = "last-layer";
};

int run_transfer(const TransferOpts& o) {
  const egoflow::NetworkModel base = egoflow::load_model(o.base);
  const std::vector<egoflow::FlowVolume> volumes =
      egoflow::read_volume_dataset(o.train.volumes);
  const std::vector<std::string> labels = split_names(o.train.labels_csv);
  std::vector<double> history;
  egoflow::TrainConfig cfg = make_train_config(o.train, &history);
  if (o.mode == "last-layer") {
    cfg.mode = egoflow::TrainConfig::Mode::last_layer_only;
  } else if (o.mode == "warm-start") {
    cfg.mode = egoflow::TrainConfig::Mode::warm_start;
  } else if (o.mode == "full") {
    cfg.mode = egoflow::TrainConfig::Mode::full;
  } else {
    throw egoflow::Error(egoflow::ErrorKind::usage,
                         "--mode must be last-layer, warm-start, or full");
  }
  const egoflow::NetworkModel model =
      egoflow::train(volumes, labels, cfg, &base);
  egoflow::save_model(o.train.out, model);
  maybe_write_loss(o.train, history);
  emit({{"command", "transfer"},
        {"mode", o.mode},
        {"base", o.base},
        {"volumes", volumes.size()},
        {"classes", labels.size()},
        {"iterations", o.train.iterations},
        {"final_loss", history.empty() ? json(nullptr) : json(history.back())},
        {"out", o.train.out}});
  return 0;
}

struct ClassifyOpts {
  std::string model;
  std::string volumes;
  std::string out;
  int threads = 0;
};

int run_classify(const ClassifyOpts& o) {
  const egoflow::NetworkModel model = egoflow::load_model(o.model);
  const std::vector<egoflow::FlowVolume> volumes =
      egoflow::read_volume_dataset(o.volumes);
  if (volumes.empty()) throw egoflow::EmptyInput("no volumes to classify");

  std::vector<std::vector<double>> scores(volumes.size());
  const int workers = egoflow::resolve_thread_count(o.threads);
  std::vector<egoflow::nn::Conv3dWorkspace> ws(static_cast<std::size_t>(workers));
  egoflow::parallel_for(
      volumes.size(),
      [&](std::size_t i, int worker) {
        scores[i] = egoflow::class_scores(model, volumes[i],
                                          &ws[static_cast<std::size_t>(worker)]);
      },
      o.threads);

  std::string lines;
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    int best = 0;
    for (std::size_t k = 1; k < scores[i].size(); ++k) {
      if (scores[i][k] > scores[i][best]) best = static_cast<int>(k);
    }
    json line{{"index", i},
              {"start_frame", volumes[i].start_frame},
              {"predicted", best},
              {"class", model.labels[static_cast<std::size_t>(best)]},
              {"scores", scores[i]}};
    if (volumes[i].label >= 0) line["label"] = volumes[i].label;
    lines += line.dump();
    lines.push_back('\n');
  }
  if (o.out.empty()) {
    std::fwrite(lines.data(), 1, lines.size(), stdout);
  } else {
    write_text_file(o.out, lines);
    emit({{"command", "classify"}, {"volumes", volumes.size()}, {"out", o.out}});
  }
  return 0;
}

struct SegmentOpts {
  std::string model;
  std::string flow;
  std::string volumes;
  std::string out;
  int eta = egoflow::kDefaultEta;
  int threads = 0;
};

int run_segment(const SegmentOpts& o) {
  const egoflow::NetworkModel model = egoflow::load_model(o.model);
  std::vector<egoflow::FlowVolume> volumes;
  if (!o.flow.empty()) {
    volumes = egoflow::build_volumes(egoflow::read_flow_file(o.flow));
  } else if (!o.volumes.empty()) {
    volumes = egoflow::read_volume_dataset(o.volumes);
  } else {
    throw egoflow::Error(egoflow::ErrorKind::usage,
                         "one of --flow or --volumes is required");
  }
  if (volumes.empty()) throw egoflow::EmptyInput("no blocks to segment");

  egoflow::ScoreSeries series;
  series.start_frames.resize(volumes.size());
  series.scores.resize(volumes.size());
  const int workers = egoflow::resolve_thread_count(o.threads);
  std::vector<egoflow::nn::Conv3dWorkspace> ws(static_cast<std::size_t>(workers));
  egoflow::parallel_for(
      volumes.size(),
      [&](std::size_t i, int worker) {
        series.scores[i] = egoflow::class_scores(
            model, volumes[i], &ws[static_cast<std::size_t>(worker)]);
      },
      o.threads);
  for (std::size_t i = 0; i < volumes.size(); ++i) {
    series.start_frames[i] = volumes[i].start_frame;
  }

  const egoflow::ActivityTimeline timeline =
      egoflow::segment_timeline(series, o.eta);
  json doc = timeline_to_json(timeline, model.labels);
  doc["command"] = "segment";
  doc["blocks"] = volumes.size();
  doc["eta"] = o.eta;
  if (o.out.empty()) {
    emit(doc);
  } else {
    write_text_file(o.out, doc.dump(2) + "\n");
    emit({{"command", "segment"},
          {"blocks", volumes.size()},
          {"segments", timeline.segments.size()},
          {"out", o.out}});
  }
  return 0;
}

struct EvaluateOpts {
  std::vector<std::string> volumes;
  std::string model;
  int eta = 1;
  int threads = 0;
};

int run_evaluate(const EvaluateOpts& o) {
  const egoflow::NetworkModel model = egoflow::load_model(o.model);
  std::vector<std::vector<egoflow::FlowVolume>> sequences;
  sequences.reserve(o.volumes.size());
  for (const std::string& path : o.volumes) {
    sequences.push_back(egoflow::read_volume_dataset(path));
  }
  const egoflow::EvaluationReport report =
      egoflow::evaluate(model, sequences, o.eta, o.threads);
  json doc = report_to_json(report);
  doc["command"] = "evaluate";
  doc["eta"] = o.eta;
  emit(doc);
  return 0;
}

struct AffinityOpts {
  std::string model;
  std::string volumes;
  std::string out;
  int vote_depth = 3;
  int threads = 0;
};

int run_affinity(const AffinityOpts& o) {
  const egoflow::NetworkModel model = egoflow::load_model(o.model);
  const std::vector<egoflow::FlowVolume> volumes =
      egoflow::read_volume_dataset(o.volumes);
  const egoflow::AffinityMatrix matrix =
      egoflow::kernel_affinity(model, volumes, o.vote_depth, o.threads);
  const std::string csv = egoflow::affinity_to_csv(matrix, model.labels);
  if (o.out.empty()) {
    std::fwrite(csv.data(), 1, csv.size(), stdout);
  } else {
    write_text_file(o.out, csv);
    emit({{"command", "affinity"},
          {"volumes", volumes.size()},
          {"vote_depth", o.vote_depth},
          {"out", o.out}});
  }
  return 0;
}

struct VisualizeOpts {
  std::string model;
  std::string out_dir;
  std::string format = "svg";
  int kernel = -1;
  int step = 1;
  int cell_px = 12;
};

int run_visualize(const VisualizeOpts& o) {
  const egoflow::NetworkModel model = egoflow::load_model(o.model);
  if (o.format != "svg" && o.format != "ppm" && o.format != "both") {
    throw egoflow::Error(egoflow::ErrorKind::usage,
                         "--format must be svg, ppm, or both");
  }
  std::filesystem::create_directories(o.out_dir);
  std::vector<int> kernels;
  if (o.kernel >= 0) {
    kernels.push_back(o.kernel);
  } else {
    for (int k = 0; k < model.c1.kernel_count; ++k) kernels.push_back(k);
  }

  std::size_t files = 0;
  for (int k : kernels) {
    if (o.format == "svg" || o.format == "both") {
      const std::vector<std::string> docs =
          egoflow::render_kernel_flowfields(model, k, o.step);
      for (std::size_t p = 0; p < docs.size(); ++p) {
        write_text_file(o.out_dir + "/kernel_" + std::to_string(k) + "_pair_" +
                            std::to_string(p) + ".svg",
                        docs[p]);
        ++files;
      }
    }
    if (o.format == "ppm" || o.format == "both") {
      const std::vector<std::string> imgs =
          egoflow::render_kernel_flowfields_ppm(model, k, o.cell_px, o.step);
      for (std::size_t p = 0; p < imgs.size(); ++p) {
        write_text_file(o.out_dir + "/kernel_" + std::to_string(k) + "_pair_" +
                            std::to_string(p) + ".ppm",
                        imgs[p]);
        ++files;
      }
    }
  }
  emit({{"command", "visualize-kernels"},
        {"kernels", kernels.size()},
        {"files", files},
        {"format", o.format},
        {"out_dir", o.out_dir}});
  return 0;
}

int run_info(const std::string& path) {
  std::ifstream probe = egoflow::io::open_for_read(path);
  char magic[4] = {0, 0, 0, 0};
  probe.read(magic, 4);
  if (probe.gcount() != 4) throw egoflow::FormatError("file too short for a magic");
  const std::string kind(magic, 4);
  probe.close();

  if (kind == "EGFR") {
    const egoflow::FrameSequence seq = egoflow::read_frame_file(path);
    emit({{"command", "info"},
          {"format", "EGFR"},
          {"frames", seq.frames.size()},
          {"width", seq.frames.empty() ? 0 : seq.frames[0].width},
          {"height", seq.frames.empty() ? 0 : seq.frames[0].height},
          {"fps", seq.native_fps}});
  } else if (kind == "EGFL") {
    const std::vector<egoflow::FlowField> fields = egoflow::read_flow_file(path);
    std::size_t cells_failed = 0;
    for (const egoflow::FlowField& f : fields) {
      for (std::uint8_t c : f.converged) cells_failed += c ? 0 : 1;
    }
    emit({{"command", "info"},
          {"format", "EGFL"},
          {"fields", fields.size()},
          {"failed_cells", cells_failed}});
  } else if (kind == "EGVD") {
    const std::vector<egoflow::FlowVolume> volumes =
        egoflow::read_volume_dataset(path);
    std::map<int, std::size_t> hist;
    for (const egoflow::FlowVolume& v : volumes) hist[v.label]++;
    json labels = json::object();
    for (const auto& [label, count] : hist) {
      labels[std::to_string(label)] = count;
    }
    emit({{"command", "info"},
          {"format", "EGVD"},
          {"volumes", volumes.size()},
          {"label_histogram", labels}});
  } else if (kind == "EGNT") {
    const egoflow::NetworkModel model = egoflow::load_model(path);
    const egoflow::ParameterCounts counts = egoflow::count_parameters(model);
    emit({{"command", "info"},
          {"format", "EGNT"},
          {"labels", model.labels},
          {"seed", model.seed},
          {"p95_u", model.norm_stats.p95_u},
          {"p95_v", model.norm_stats.p95_v},
          {"weights_excluding_classifier", counts.weights_excluding_classifier},
          {"total_with_biases", counts.total_with_biases}});
  } else {
    throw egoflow::FormatError("unrecognized file magic '" + kind + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  egoflow::ensure_blas_core(argv);

  CLI::App app{"egocentric motion indexing pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI file");

  SynthOpts synth_o;
  CLI::App* synth = app.add_subcommand(
      "synth", "generate a labeled synthetic motion dataset (EGVD)");
  synth->add_option("--out", synth_o.out, "output dataset (EGVD)")->required();
  synth->add_option("--per-class", synth_o.per_class, "volumes per class");
  synth->add_option("--noise-ratio", synth_o.noise_ratio,
                    "noise sigma as a fraction of each class's typical magnitude");
  synth->add_option("--seed", synth_o.seed, "RNG seed");
  synth->add_option("--classes", synth_o.classes_csv,
                    "comma separated subset of: translate,rotate,zoom,bob,static,window");

  ImportOpts import_o;
  CLI::App* import_frames = app.add_subcommand(
      "import-frames", "pack a directory of PGM frames into one file (EGFR)");
  import_frames->add_option("--dir", import_o.dir, "directory of .pgm frames")
      ->required();
  import_frames->add_option("--fps", import_o.fps, "native frame rate")->required();
  import_frames->add_option("--out", import_o.out, "output file (EGFR)")->required();

  ExtractOpts extract_o;
  CLI::App* extract = app.add_subcommand(
      "extract-flow", "per-grid-cell optical flow at 15 fps (EGFL)");
  extract->add_option("--frames", extract_o.frames_file, "input frames (EGFR)");
  extract->add_option("--frames-dir", extract_o.frames_dir,
                      "directory of .pgm frames (needs --fps)");
  extract->add_option("--fps", extract_o.fps, "native fps for --frames-dir");
  extract->add_option("--out", extract_o.out, "output flow file (EGFL)")->required();
  extract->add_option("--threads", extract_o.threads, "worker threads; 0 = auto");
  extract->add_option("--lk-iterations", extract_o.lk_iterations,
                      "max Gauss-Newton steps per cell");
  extract->add_option("--lk-epsilon", extract_o.lk_epsilon,
                      "convergence threshold on the step norm");
  extract->add_flag("--no-fill", extract_o.no_fill,
                    "keep failed cells at zero instead of interpolating");

  BuildOpts build_o;
  CLI::App* build = app.add_subcommand(
      "build-volumes", "stack flow fields into overlapping blocks (EGVD)");
  build->add_option("--flow", build_o.flow, "input flow file (EGFL)")->required();
  build->add_option("--out", build_o.out, "output dataset (EGVD)")->required();
  build->add_option("--label", build_o.label,
                    "class label for every volume; -1 = unlabeled");

  std::string fitnorm_volumes;
  CLI::App* fitnorm = app.add_subcommand(
      "fit-norm", "report the normalization percentiles of a dataset");
  fitnorm->add_option("--volumes", fitnorm_volumes, "input dataset (EGVD)")
      ->required();

  TrainOpts train_o;
  CLI::App* train = app.add_subcommand("train", "train a model from scratch");
  add_train_opts(train, train_o);

  TransferOpts transfer_o;
  CLI::App* transfer = app.add_subcommand(
      "transfer", "adapt a trained model to a new label set");
  add_train_opts(transfer, transfer_o.train);
  transfer->add_option("--base", transfer_o.base, "initial model (EGNT)")
      ->required();
  transfer->add_option("--mode", transfer_o.mode,
                       "last-layer (frozen backbone), warm-start, or full");

  ClassifyOpts classify_o;
  CLI::App* classify = app.add_subcommand(
      "classify", "score each volume; JSON line per volume");
  classify->add_option("--model", classify_o.model, "model file (EGNT)")->required();
  classify->add_option("--volumes", classify_o.volumes, "input dataset (EGVD)")
      ->required();
  classify->add_option("--out", classify_o.out,
                       "write JSON lines here instead of stdout");
  classify->add_option("--threads", classify_o.threads, "worker threads; 0 = auto");

  SegmentOpts segment_o;
  CLI::App* segment = app.add_subcommand(
      "segment", "temporally smoothed activity timeline for one recording");
  segment->add_option("--model", segment_o.model, "model file (EGNT)")->required();
  segment->add_option("--flow", segment_o.flow, "input flow file (EGFL)");
  segment->add_option("--volumes", segment_o.volumes,
                      "input dataset (EGVD) of consecutive blocks");
  segment->add_option("--eta", segment_o.eta,
                      "temporal context window in blocks (odd)");
  segment->add_option("--out", segment_o.out, "write the timeline JSON here");
  segment->add_option("--threads", segment_o.threads, "worker threads; 0 = auto");

  EvaluateOpts evaluate_o;
  CLI::App* evaluate = app.add_subcommand(
      "evaluate", "metrics of a model on labeled data");
  evaluate->add_option("--model", evaluate_o.model, "model file (EGNT)")->required();
  evaluate
      ->add_option("--volumes", evaluate_o.volumes,
                   "labeled dataset(s); each file is one temporal sequence")
      ->required()
      ->take_all();
  evaluate->add_option("--eta", evaluate_o.eta,
                       "temporal context window in blocks (odd)");
  evaluate->add_option("--threads", evaluate_o.threads, "worker threads; 0 = auto");

  AffinityOpts affinity_o;
  CLI::App* affinity = app.add_subcommand(
      "affinity", "class-to-kernel vote matrix as CSV");
  affinity->add_option("--model", affinity_o.model, "model file (EGNT)")->required();
  affinity->add_option("--volumes", affinity_o.volumes, "labeled dataset (EGVD)")
      ->required();
  affinity->add_option("--vote-depth", affinity_o.vote_depth,
                       "strongest kernels voting per volume");
  affinity->add_option("--out", affinity_o.out, "write CSV here instead of stdout");
  affinity->add_option("--threads", affinity_o.threads, "worker threads; 0 = auto");

  VisualizeOpts visualize_o;
  CLI::App* visualize = app.add_subcommand(
      "visualize-kernels", "draw first-layer kernels as flow-field images");
  visualize->add_option("--model", visualize_o.model, "model file (EGNT)")
      ->required();
  visualize->add_option("--out-dir", visualize_o.out_dir, "output directory")
      ->required();
  visualize->add_option("--format", visualize_o.format, "svg, ppm, or both");
  visualize->add_option("--kernel", visualize_o.kernel,
                        "single kernel id; -1 = all");
  visualize->add_option("--step", visualize_o.step, "draw every n-th cell");
  visualize->add_option("--cell-px", visualize_o.cell_px,
                        "cell size in pixels (ppm only)");

  std::string info_path;
  CLI::App* info = app.add_subcommand("info", "describe any pipeline file");
  info->add_option("file", info_path, "EGFR / EGFL / EGVD / EGNT file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*synth) return run_synth(synth_o);
    if (*import_frames) return run_import_frames(import_o);
    if (*extract) return run_extract_flow(extract_o);
    if (*build) return run_build_volumes(build_o);
    if (*fitnorm) return run_fit_norm(fitnorm_volumes);
    if (*train) return run_train(train_o);
    if (*transfer) return run_transfer(transfer_o);
    if (*classify) return run_classify(classify_o);
    if (*segment) return run_segment(segment_o);
    if (*evaluate) return run_evaluate(evaluate_o);
    if (*affinity) return run_affinity(affinity_o);
    if (*visualize) return run_visualize(visualize_o);
    if (*info) return run_info(info_path);
  } catch (const egoflow::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return static_cast<int>(egoflow::ErrorKind::numeric);
  }
  return 0;
}
