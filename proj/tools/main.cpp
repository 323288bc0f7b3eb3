// twophoton: command-line pipeline for two-photon calcium imaging stacks.
// Subcommands compose through files only; reports carry no timestamps or
// absolute paths so identical inputs give byte-identical outputs.

#include <charconv>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "twophoton/errors.hpp"
#include "twophoton/intensity.hpp"
#include "twophoton/movement.hpp"
#include "twophoton/registration.hpp"
#include "twophoton/stack.hpp"
#include "twophoton/stack_io.hpp"
#include "twophoton/synthgen.hpp"
#include "twophoton/variance_tests.hpp"

namespace fs = std::filesystem;
using namespace twophoton;

namespace {

constexpr int kExitStageFailure = 1;
constexpr int kExitMissingInput = 2;

// Missing inputs are a distinct, scriptable failure mode.
bool inputs_exist(const std::vector<std::string>& paths) {
  bool ok = true;
  for (const std::string& p : paths) {
    if (p.empty() || !fs::exists(p)) {
      std::fprintf(stderr, "error: missing input: %s\n", p.c_str());
      ok = false;
    }
  }
  return ok;
}

int fail_stage(const std::string& stage, const std::exception& e) {
  std::fprintf(stderr, "error: stage '%s' failed: %s\n", stage.c_str(),
               e.what());
  return kExitStageFailure;
}

Index parse_ref_time(const std::string& text) {
  if (text == "mid")
    return -1;
  Index value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || value < 0)
    throw ConfigError("--ref-time must be 'mid' or a non-negative frame index");
  return value;
}

Center parse_center(const std::string& text) {
  if (text == "mean")
    return Center::mean;
  if (text == "median")
    return Center::median;
  throw ConfigError("center must be 'mean' or 'median'");
}

MovementKind parse_kind(const std::string& text) {
  if (text == "framediff")
    return MovementKind::framediff;
  if (text == "shiftmag")
    return MovementKind::shiftmag;
  throw ConfigError("kind must be 'framediff' or 'shiftmag'");
}

// One header line, then one numeric cell per row.
std::vector<double> load_value_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw FormatError("empty csv: " + path);
  std::vector<double> values;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r')
      line.pop_back();
    if (line.empty())
      continue;
    double v = 0.0;
    const char* begin = line.data();
    const char* end = begin + line.size();
    auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end)
      throw ParseError("non-numeric cell '" + line + "' in " + path);
    values.push_back(v);
  }
  return values;
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("malformed JSON in " + path + ": " + e.what());
  }
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw IoError("cannot open for writing: " + path);
  out << content;
  if (!out.flush())
    throw IoError("write failed: " + path);
}

std::string out_path(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

// Pixels valid in every frame of an alignment result.
MaskMatrix all_frames_valid(const std::vector<MaskMatrix>& masks) {
  if (masks.empty())
    throw std::invalid_argument("no masks available for --valid-only");
  MaskMatrix acc = masks.front();
  for (std::size_t i = 1; i < masks.size(); ++i)
    acc = acc && masks[i];
  return acc;
}

MaskMatrix masks_from_csv(const AlignmentResult& result, Index rows,
                          Index cols) {
  MaskMatrix acc = MaskMatrix::Constant(rows, cols, true);
  for (const RigidTransform& t : result.transforms)
    acc = acc && warp_valid_mask(rows, cols, t);
  return acc;
}

// ---------------------------------------------------------------- align ----

struct AlignOpts {
  std::string stack;
  std::string out;
  std::string ref_time = "mid";
  Index ref_channel = 0;
  double max_shift = 10.0;
  double max_theta = 0.1;
  double tol_px = 1e-3;
  double tol_rad = 1e-4;
  int max_iters = 200;
  int threads = 1;
};

int run_align(const AlignOpts& o) {
  if (!inputs_exist({o.stack}))
    return kExitMissingInput;
  try {
    const ImageStack stack = load_stack(o.stack);
    AlignmentConfig cfg;
    cfg.reference_channel = o.ref_channel;
    cfg.reference_time = parse_ref_time(o.ref_time);
    cfg.max_shift_px = o.max_shift;
    cfg.max_theta_rad = o.max_theta;
    cfg.tol_px = o.tol_px;
    cfg.tol_rad = o.tol_rad;
    cfg.max_iters = o.max_iters;
    cfg.threads = o.threads;
    const auto [aligned, result] = align_stack(stack, cfg);
    fs::create_directories(o.out);
    save_stack(aligned, out_path(o.out, "aligned.json"));
    save_alignment_csv(result, out_path(o.out, "alignment.csv"));
    return 0;
  } catch (const std::exception& e) {
    return fail_stage("align", e);
  }
}

// ------------------------------------------------------------- equalize ----

struct EqualizeOpts {
  std::string stack;
  std::string out;
  Index channel = 1;
};

int run_equalize(const EqualizeOpts& o) {
  if (!inputs_exist({o.stack}))
    return kExitMissingInput;
  try {
    const ImageStack stack = load_stack(o.stack);
    const auto [equalized, report] = mean_equalize(stack.channel(o.channel));
    fs::create_directories(o.out);
    save_stack(equalized, out_path(o.out, "equalized.json"));
    write_text(out_path(o.out, "equalize_report.json"),
               to_json_string(report) + "\n");
    return 0;
  } catch (const std::exception& e) {
    return fail_stage("equalize", e);
  }
}

// ---------------------------------------------------------------- stats ----

struct StatsOpts {
  std::string stack;
  std::string out;
  std::string transforms;
  Index channel = 0;
  bool valid_only = false;
};

int run_stats(const StatsOpts& o) {
  std::vector<std::string> inputs{o.stack};
  if (o.valid_only)
    inputs.push_back(o.transforms);
  if (!inputs_exist(inputs))
    return kExitMissingInput;
  try {
    const ImageStack stack = load_stack(o.stack);
    PixelStats ps;
    if (o.valid_only) {
      const AlignmentResult result = load_alignment_csv(o.transforms);
      const MaskMatrix mask = masks_from_csv(result, stack.rows, stack.cols);
      ps = pixel_stats(stack.channel(o.channel), mask);
    } else {
      ps = pixel_stats(stack.channel(o.channel));
    }
    fs::create_directories(o.out);
    export_pgm(ps.mean_map, out_path(o.out, "mean.pgm"));
    export_pgm(ps.var_map, out_path(o.out, "var.pgm"));
    const nlohmann::json j{{"frames_used", ps.frames_used},
                           {"total_variance", total_variance(ps)}};
    write_text(out_path(o.out, "stats.json"), j.dump(2) + "\n");
    return 0;
  } catch (const std::exception& e) {
    return fail_stage("stats", e);
  }
}

// -------------------------------------------------------------- scatter ----

struct ScatterOpts {
  std::string stack;
  std::string out;
  Index channel = 0;
  double epsilon = 1e-12;
};

int run_scatter(const ScatterOpts& o) {
  if (!inputs_exist({o.stack}))
    return kExitMissingInput;
  try {
    const ImageStack stack = load_stack(o.stack);
    const PixelStats ps = pixel_stats(stack.channel(o.channel));
    fs::create_directories(o.out);
    export_csv_pairs(mean_variance_scatter(ps, o.epsilon),
                     out_path(o.out, "scatter.csv"), "log_mean,log_var");
    return 0;
  } catch (const std::exception& e) {
    return fail_stage("scatter", e);
  }
}

// -------------------------------------------------------------- diffmap ----

struct DiffmapOpts {
  std::string stack_a;
  std::string stack_b;
  std::string out;
  Index channel = 1;
};

int run_diffmap(const DiffmapOpts& o) {
  if (!inputs_exist({o.stack_a, o.stack_b}))
    return kExitMissingInput;
  try {
    const ImageStack a = load_stack(o.stack_a);
    const ImageStack b = load_stack(o.stack_b);
    const MapMatrix diff =
        difference_map(pixel_stats(a.channel(o.channel)).mean_map,
                       pixel_stats(b.channel(o.channel)).mean_map);
    fs::create_directories(o.out);
    export_pgm(diff, out_path(o.out, "diff.pgm"));
    return 0;
  } catch (const std::exception& e) {
    return fail_stage("diffmap", e);
  }
}

// ------------------------------------------------------------- movement ----

// Per-trial groups of a movement series: values whose time falls in
// [trial_start, trial_start + window_s).
GroupedSamples windowed_groups(const MovementSeries& series,
                               const StimSchedule& schedule, double window_s) {
  GroupedSamples samples;
  for (double start : schedule.trial_starts_s) {
    std::vector<double> group;
    for (std::size_t t = 0; t < series.values.size(); ++t) {
      const double time_s = static_cast<double>(t) * series.frame_period_s;
      if (time_s >= start && time_s < start + window_s)
        group.push_back(series.values[t]);
    }
    samples.groups.push_back(std::move(group));
  }
  return samples;
}

struct MovementOpts {
  std::string stack;
  std::string out;
  std::string aligned;
  std::string schedule;
  std::string kind = "framediff";
  std::string center = "mean";
  Index channel = 0;
  double window_s = 0.0;
};

int run_movement(const MovementOpts& o) {
  std::vector<std::string> inputs{o.stack};
  if (!o.aligned.empty())
    inputs.push_back(o.aligned);
  if (!o.schedule.empty())
    inputs.push_back(o.schedule);
  if (!inputs_exist(inputs))
    return kExitMissingInput;
  try {
    const MovementKind kind = parse_kind(o.kind);
    const ImageStack stack = load_stack(o.stack);
    MovementSeries series;
    if (kind == MovementKind::framediff) {
      series = framediff_series(stack.channel(o.channel));
    } else {
      if (o.aligned.empty())
        throw ConfigError("--kind shiftmag needs --aligned <alignment.csv>");
      series = shiftmag_series(load_alignment_csv(o.aligned),
                               stack.frame_period_s);
    }
    std::vector<std::pair<double, double>> rows;
    rows.reserve(series.values.size());
    for (std::size_t t = 0; t < series.values.size(); ++t)
      rows.emplace_back(static_cast<double>(t) * series.frame_period_s,
                        series.values[t]);
    fs::create_directories(o.out);
    export_csv_pairs(rows, out_path(o.out, "movement.csv"), "t_s,value");
    if (!o.schedule.empty()) {
      const StimSchedule schedule = load_schedule(o.schedule);
      export_csv_series(shock_times(schedule), out_path(o.out, "shocks.csv"),
                        "shock_time_s");
      if (o.window_s > 0.0) {
        const LeveneReport windowed =
            levene(windowed_groups(series, schedule, o.window_s),
                   parse_center(o.center));
        write_text(out_path(o.out, "windowed_levene.json"),
                   to_json_string(windowed) + "\n");
      }
    } else if (o.window_s > 0.0) {
      throw ConfigError("--window needs --schedule");
    }
    return 0;
  } catch (const std::exception& e) {
    return fail_stage("movement", e);
  }
}

// --------------------------------------------------------------- levene ----

struct LeveneOpts {
  std::string group_a;
  std::string group_b;
  std::string out;
  std::string center = "mean";
};

int run_levene(const LeveneOpts& o) {
  if (!inputs_exist({o.group_a, o.group_b}))
    return kExitMissingInput;
  try {
    GroupedSamples samples;
    samples.groups = {load_value_csv(o.group_a), load_value_csv(o.group_b)};
    const LeveneReport report = levene(samples, parse_center(o.center));
    fs::create_directories(o.out);
    write_text(out_path(o.out, "levene.json"), to_json_string(report) + "\n");
    return 0;
  } catch (const std::exception& e) {
    return fail_stage("levene", e);
  }
}

// ---------------------------------------------------------------- synth ----

SynthConfig synth_config_from_json(const nlohmann::json& j) {
  SynthConfig cfg;
  cfg.rows = j.value("rows", cfg.rows);
  cfg.cols = j.value("cols", cfg.cols);
  cfg.frames = j.value("frames", cfg.frames);
  cfg.n_cells = j.value("n_cells", cfg.n_cells);
  cfg.cell_radius_px = j.value("cell_radius_px", cfg.cell_radius_px);
  cfg.baseline = j.value("baseline", cfg.baseline);
  cfg.noise_sd = j.value("noise_sd", cfg.noise_sd);
  cfg.drift_amplitude_px = j.value("drift_amplitude_px", cfg.drift_amplitude_px);
  cfg.drift_period_frames =
      j.value("drift_period_frames", cfg.drift_period_frames);
  cfg.theta_amplitude_rad =
      j.value("theta_amplitude_rad", cfg.theta_amplitude_rad);
  cfg.active_cells = j.value("active_cells", cfg.active_cells);
  cfg.transient_gain = j.value("transient_gain", cfg.transient_gain);
  cfg.global_gain_wobble =
      j.value("global_gain_wobble", cfg.global_gain_wobble);
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("stim")) {
    const nlohmann::json& s = j.at("stim");
    cfg.stim.trial_starts_s = s.value("trial_starts_s", cfg.stim.trial_starts_s);
    cfg.stim.shocks_per_trial =
        s.value("shocks_per_trial", cfg.stim.shocks_per_trial);
    cfg.stim.shock_duration_ms =
        s.value("shock_duration_ms", cfg.stim.shock_duration_ms);
    cfg.stim.inter_shock_gap_ms =
        s.value("inter_shock_gap_ms", cfg.stim.inter_shock_gap_ms);
    cfg.stim.current_mA = s.value("current_mA", cfg.stim.current_mA);
  }
  return cfg;
}

nlohmann::json truth_to_json(const SynthTruth& truth) {
  nlohmann::json transforms = nlohmann::json::array();
  for (const RigidTransform& t : truth.true_transforms)
    transforms.push_back({{"dx", t.dx}, {"dy", t.dy}, {"theta", t.theta}});
  nlohmann::json centers = nlohmann::json::array();
  for (const auto& [r, c] : truth.cell_centers)
    centers.push_back({r, c});
  return nlohmann::json{{"transforms", transforms},
                        {"cell_centers", centers},
                        {"cell_active_flags", truth.cell_active_flags},
                        {"per_frame_gain", truth.per_frame_gain}};
}

struct SynthOpts {
  std::string config;
  std::string out;
};

int run_synth(const SynthOpts& o) {
  if (!inputs_exist({o.config}))
    return kExitMissingInput;
  try {
    const SynthConfig cfg = synth_config_from_json(load_json(o.config));
    const auto [stack, truth] = generate(cfg);
    fs::create_directories(o.out);
    save_stack(stack, out_path(o.out, "stack.json"));
    write_text(out_path(o.out, "truth.json"), truth_to_json(truth).dump(2) + "\n");
    export_csv_series(cfg.stim.trial_starts_s, out_path(o.out, "trials.csv"),
                      "trial_start_s");
    return 0;
  } catch (const std::exception& e) {
    return fail_stage("synth", e);
  }
}

// ------------------------------------------------------------- pipeline ----

struct PipelineSpec {
  std::string resting_stack;
  std::string stimulated_stack;
  std::string resting_heart;
  std::string stimulated_heart;
  std::string schedule; // optional
  Index channel = 1;
  bool valid_only = false;
  Center center = Center::mean;
  double window_s = 0.0; // 0 disables the per-trial windowed test
  AlignmentConfig align;
};

PipelineSpec pipeline_spec_from_json(const nlohmann::json& j,
                                     const fs::path& base_dir) {
  const auto resolve = [&](const std::string& p) -> std::string {
    if (p.empty())
      return p;
    const fs::path path(p);
    return path.is_absolute() ? path.string() : (base_dir / path).string();
  };

  PipelineSpec spec;
  try {
    spec.resting_stack = resolve(j.at("resting_stack").get<std::string>());
    spec.stimulated_stack = resolve(j.at("stimulated_stack").get<std::string>());
    spec.resting_heart = resolve(j.at("resting_heart_csv").get<std::string>());
    spec.stimulated_heart =
        resolve(j.at("stimulated_heart_csv").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("pipeline config: ") + e.what());
  }
  spec.schedule = resolve(j.value("schedule_csv", std::string()));
  spec.channel = j.value("channel", spec.channel);
  spec.valid_only = j.value("valid_only", spec.valid_only);
  spec.center = parse_center(j.value("center", std::string("mean")));
  spec.window_s = j.value("window_s", spec.window_s);

  if (j.contains("alignment")) {
    const nlohmann::json& a = j.at("alignment");
    spec.align.reference_channel =
        a.value("reference_channel", spec.align.reference_channel);
    if (a.contains("reference_time")) {
      const nlohmann::json& rt = a.at("reference_time");
      spec.align.reference_time =
          rt.is_string() ? parse_ref_time(rt.get<std::string>())
                         : rt.get<Index>();
    }
    spec.align.max_shift_px = a.value("max_shift_px", spec.align.max_shift_px);
    spec.align.max_theta_rad =
        a.value("max_theta_rad", spec.align.max_theta_rad);
    spec.align.tol_px = a.value("tol_px", spec.align.tol_px);
    spec.align.tol_rad = a.value("tol_rad", spec.align.tol_rad);
    spec.align.max_iters = a.value("max_iters", spec.align.max_iters);
  }
  spec.align.threads = j.value("threads", spec.align.threads);
  return spec;
}

struct PipelineOpts {
  std::string config;
  std::string out;
  int threads = 0;        // 0 = take the config's value
  double window_s = -1.0; // < 0 = take the config's value
};

int run_pipeline(const PipelineOpts& o) {
  if (!inputs_exist({o.config}))
    return kExitMissingInput;

  PipelineSpec spec;
  try {
    spec = pipeline_spec_from_json(load_json(o.config),
                                   fs::path(o.config).parent_path());
    if (o.threads > 0)
      spec.align.threads = o.threads;
    if (o.window_s >= 0.0)
      spec.window_s = o.window_s;
  } catch (const std::exception& e) {
    return fail_stage("config", e);
  }

  std::vector<std::string> inputs{spec.resting_stack, spec.stimulated_stack,
                                  spec.resting_heart, spec.stimulated_heart};
  if (!spec.schedule.empty())
    inputs.push_back(spec.schedule);
  if (!inputs_exist(inputs))
    return kExitMissingInput;

  nlohmann::json report;
  std::vector<std::string> artifacts;
  const auto emit = [&](const std::string& name) { artifacts.push_back(name); };

  struct State {
    std::string name;
    ImageStack raw;
    ImageStack aligned;
    AlignmentResult alignment;
    ImageStack equalized;
    MaskMatrix mask; // pixels valid in every frame (when valid_only)
    double align_reduction_pct = 0.0;
    double equalize_reduction_pct = 0.0;
    MapMatrix equalized_mean;
  };
  State rest{"rest"}, stim{"stim"};
  BioSignal rest_heart, stim_heart;
  StimSchedule schedule;

  try {
    rest.raw = load_stack(spec.resting_stack);
    stim.raw = load_stack(spec.stimulated_stack);
    rest_heart = load_biosignal(spec.resting_heart);
    stim_heart = load_biosignal(spec.stimulated_heart);
    if (!spec.schedule.empty())
      schedule = load_schedule(spec.schedule);
  } catch (const std::exception& e) {
    return fail_stage("load", e);
  }

  try {
    fs::create_directories(o.out);
  } catch (const std::exception& e) {
    return fail_stage("output", e);
  }

  try {
    for (State* state : {&rest, &stim}) {
      auto [aligned, result] = align_stack(state->raw, spec.align);
      state->aligned = std::move(aligned);
      state->alignment = std::move(result);
      if (spec.valid_only)
        state->mask = all_frames_valid(state->alignment.valid_masks);

      const ChannelView raw_ch = state->raw.channel(spec.channel);
      const ChannelView aligned_ch = state->aligned.channel(spec.channel);
      const double before =
          total_variance(spec.valid_only ? pixel_stats(raw_ch, state->mask)
                                         : pixel_stats(raw_ch));
      const double after = total_variance(
          spec.valid_only ? pixel_stats(aligned_ch, state->mask)
                          : pixel_stats(aligned_ch));
      state->align_reduction_pct = variance_reduction_pct(before, after);

      save_stack(state->aligned, out_path(o.out, state->name + "_aligned.json"));
      emit(state->name + "_aligned.json");
      emit(state->name + "_aligned.bin");
      save_alignment_csv(state->alignment,
                         out_path(o.out, state->name + "_alignment.csv"));
      emit(state->name + "_alignment.csv");
    }
    report["alignment_variance_reduction_pct"] = {
        {"resting", rest.align_reduction_pct},
        {"stimulated", stim.align_reduction_pct}};
  } catch (const std::exception& e) {
    return fail_stage("align", e);
  }

  try {
    for (State* state : {&rest, &stim}) {
      auto [equalized, eq_report] =
          mean_equalize(state->aligned.channel(spec.channel));
      state->equalized = std::move(equalized);
      state->equalize_reduction_pct = eq_report.reduction_pct;
      save_stack(state->equalized,
                 out_path(o.out, state->name + "_equalized.json"));
      emit(state->name + "_equalized.json");
      emit(state->name + "_equalized.bin");
      write_text(out_path(o.out, state->name + "_equalize_report.json"),
                 to_json_string(eq_report) + "\n");
      emit(state->name + "_equalize_report.json");
    }
    report["equalization_variance_reduction_pct"] = {
        {"resting", rest.equalize_reduction_pct},
        {"stimulated", stim.equalize_reduction_pct}};
  } catch (const std::exception& e) {
    return fail_stage("equalize", e);
  }

  try {
    for (State* state : {&rest, &stim}) {
      const ChannelView ch = state->equalized.channel(0);
      const PixelStats ps =
          spec.valid_only ? pixel_stats(ch, state->mask) : pixel_stats(ch);
      state->equalized_mean = ps.mean_map;
      export_pgm(ps.mean_map, out_path(o.out, state->name + "_mean.pgm"));
      emit(state->name + "_mean.pgm");
      export_pgm(ps.var_map, out_path(o.out, state->name + "_var.pgm"));
      emit(state->name + "_var.pgm");
      export_csv_pairs(mean_variance_scatter(ps),
                       out_path(o.out, state->name + "_scatter.csv"),
                       "log_mean,log_var");
      emit(state->name + "_scatter.csv");
    }
  } catch (const std::exception& e) {
    return fail_stage("stats", e);
  }

  try {
    // Movement is measured on the raw frames (alignment would remove the
    // very motion under test), structural channel.
    const MovementSeries rest_movement = framediff_series(rest.raw.channel(0));
    const MovementSeries stim_movement = framediff_series(stim.raw.channel(0));
    for (const auto& [state, series] :
         {std::pair<const State*, const MovementSeries*>{&rest, &rest_movement},
          {&stim, &stim_movement}}) {
      std::vector<std::pair<double, double>> rows;
      for (std::size_t t = 0; t < series->values.size(); ++t)
        rows.emplace_back(static_cast<double>(t) * series->frame_period_s,
                          series->values[t]);
      export_csv_pairs(rows, out_path(o.out, state->name + "_movement.csv"),
                       "t_s,value");
      emit(state->name + "_movement.csv");
    }

    const LeveneReport movement_report =
        movement_levene(rest_movement, stim_movement, spec.center);
    report["movement_levene"] =
        nlohmann::json::parse(to_json_string(movement_report));

    if (spec.window_s > 0.0) {
      if (spec.schedule.empty())
        throw ConfigError("window_s needs schedule_csv");
      const GroupedSamples groups =
          windowed_groups(stim_movement, schedule, spec.window_s);
      const LeveneReport windowed = levene(groups, spec.center);
      report["windowed_movement_levene"] =
          nlohmann::json::parse(to_json_string(windowed));
    }
  } catch (const std::exception& e) {
    return fail_stage("movement", e);
  }

  try {
    GroupedSamples heart;
    heart.groups = {rest_heart.samples, stim_heart.samples};
    const LeveneReport heart_report = levene(heart, spec.center);
    report["heart_rate_levene"] =
        nlohmann::json::parse(to_json_string(heart_report));
  } catch (const std::exception& e) {
    return fail_stage("heart", e);
  }

  try {
    const MapMatrix diff =
        difference_map(stim.equalized_mean, rest.equalized_mean);
    export_pgm(diff, out_path(o.out, "diff.pgm"));
    emit("diff.pgm");
  } catch (const std::exception& e) {
    return fail_stage("diffmap", e);
  }

  try {
    report["artifacts"] = artifacts;
    write_text(out_path(o.out, "report.json"), report.dump(2) + "\n");
  } catch (const std::exception& e) {
    return fail_stage("report", e);
  }
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-photon calcium imaging analysis toolkit"};
  app.require_subcommand(1);
  int rc = 0;

  AlignOpts align_opts;
  auto* align_cmd = app.add_subcommand(
      "align", "register every frame of a stack to a reference frame");
  align_cmd->add_option("--stack", align_opts.stack, "stack header JSON")
      ->required();
  align_cmd->add_option("--ref-channel", align_opts.ref_channel,
                        "channel registered against (0 = structural)");
  align_cmd->add_option("--ref-time", align_opts.ref_time,
                        "reference frame index, or 'mid'");
  align_cmd->add_option("--max-shift", align_opts.max_shift,
                        "shift search bound, px");
  align_cmd->add_option("--max-theta", align_opts.max_theta,
                        "rotation search bound, rad");
  align_cmd->add_option("--tol-px", align_opts.tol_px,
                        "shift convergence tolerance, px");
  align_cmd->add_option("--tol-rad", align_opts.tol_rad,
                        "rotation convergence tolerance, rad");
  align_cmd->add_option("--max-iters", align_opts.max_iters,
                        "refinement iteration cap");
  align_cmd->add_option("--threads", align_opts.threads, "worker count");
  align_cmd->add_option("--out", align_opts.out, "output directory")
      ->required();
  align_cmd->callback([&] { rc = run_align(align_opts); });

  EqualizeOpts equalize_opts;
  auto* equalize_cmd = app.add_subcommand(
      "equalize", "rescale every frame of a channel to the common mean");
  equalize_cmd->add_option("--stack", equalize_opts.stack, "stack header JSON")
      ->required();
  equalize_cmd->add_option("--channel", equalize_opts.channel,
                           "channel to equalize (1 = functional)");
  equalize_cmd->add_option("--out", equalize_opts.out, "output directory")
      ->required();
  equalize_cmd->callback([&] { rc = run_equalize(equalize_opts); });

  StatsOpts stats_opts;
  auto* stats_cmd = app.add_subcommand(
      "stats", "per-pixel temporal mean and variance maps");
  stats_cmd->add_option("--stack", stats_opts.stack, "stack header JSON")
      ->required();
  stats_cmd->add_option("--channel", stats_opts.channel, "channel index")
      ->required();
  stats_cmd->add_flag("--valid-only", stats_opts.valid_only,
                      "restrict to pixels valid in every frame");
  stats_cmd->add_option("--transforms", stats_opts.transforms,
                        "alignment CSV supplying the validity masks");
  stats_cmd->add_option("--out", stats_opts.out, "output directory")
      ->required();
  stats_cmd->callback([&] { rc = run_stats(stats_opts); });

  ScatterOpts scatter_opts;
  auto* scatter_cmd = app.add_subcommand(
      "scatter", "log-mean versus log-variance pairs, one per pixel");
  scatter_cmd->add_option("--stack", scatter_opts.stack, "stack header JSON")
      ->required();
  scatter_cmd->add_option("--channel", scatter_opts.channel, "channel index")
      ->required();
  scatter_cmd->add_option("--epsilon", scatter_opts.epsilon,
                          "guard added before the log");
  scatter_cmd->add_option("--out", scatter_opts.out, "output directory")
      ->required();
  scatter_cmd->callback([&] { rc = run_scatter(scatter_opts); });

  DiffmapOpts diffmap_opts;
  auto* diffmap_cmd = app.add_subcommand(
      "diffmap", "difference of two stacks' temporal mean images (A - B)");
  diffmap_cmd->add_option("--stack-a", diffmap_opts.stack_a,
                          "stimulated-state stack header JSON")
      ->required();
  diffmap_cmd->add_option("--stack-b", diffmap_opts.stack_b,
                          "resting-state stack header JSON")
      ->required();
  diffmap_cmd->add_option("--channel", diffmap_opts.channel, "channel index");
  diffmap_cmd->add_option("--out", diffmap_opts.out, "output directory")
      ->required();
  diffmap_cmd->callback([&] { rc = run_diffmap(diffmap_opts); });

  MovementOpts movement_opts;
  auto* movement_cmd = app.add_subcommand(
      "movement", "brain-movement time series (frame differences or shifts)");
  movement_cmd->add_option("--stack", movement_opts.stack, "stack header JSON")
      ->required();
  movement_cmd->add_option("--aligned", movement_opts.aligned,
                           "alignment CSV (required for --kind shiftmag)");
  movement_cmd->add_option("--kind", movement_opts.kind,
                           "framediff or shiftmag");
  movement_cmd->add_option("--channel", movement_opts.channel,
                           "channel for framediff (0 = structural)");
  movement_cmd->add_option("--schedule", movement_opts.schedule,
                           "trial schedule CSV; also emits shocks.csv");
  movement_cmd->add_option(
      "--window", movement_opts.window_s,
      "seconds after each trial start; groups the series per trial and "
      "emits windowed_levene.json (needs --schedule)");
  movement_cmd->add_option("--center", movement_opts.center,
                           "mean or median, for --window");
  movement_cmd->add_option("--out", movement_opts.out, "output directory")
      ->required();
  movement_cmd->callback([&] { rc = run_movement(movement_opts); });

  LeveneOpts levene_opts;
  auto* levene_cmd = app.add_subcommand(
      "levene", "equality-of-variances test between two sample files");
  levene_cmd->add_option("--group-a", levene_opts.group_a,
                         "single-column CSV of samples")
      ->required();
  levene_cmd->add_option("--group-b", levene_opts.group_b,
                         "single-column CSV of samples")
      ->required();
  levene_cmd->add_option("--center", levene_opts.center, "mean or median");
  levene_cmd->add_option("--out", levene_opts.out, "output directory")
      ->required();
  levene_cmd->callback([&] { rc = run_levene(levene_opts); });

  SynthOpts synth_opts;
  auto* synth_cmd = app.add_subcommand(
      "synth", "generate a synthetic stack with ground-truth motion");
  synth_cmd->add_option("--config", synth_opts.config, "generator config JSON")
      ->required();
  synth_cmd->add_option("--out", synth_opts.out, "output directory")
      ->required();
  synth_cmd->callback([&] { rc = run_synth(synth_opts); });

  PipelineOpts pipeline_opts;
  auto* pipeline_cmd = app.add_subcommand(
      "pipeline", "align, equalize, test, and report a resting/stimulated pair");
  pipeline_cmd->add_option("--config", pipeline_opts.config,
                           "pipeline config JSON")
      ->required();
  pipeline_cmd->add_option("--threads", pipeline_opts.threads,
                           "worker count (overrides the config)");
  pipeline_cmd->add_option("--window", pipeline_opts.window_s,
                           "per-trial grouping window in seconds "
                           "(overrides the config)");
  pipeline_cmd->add_option("--out", pipeline_opts.out, "output directory")
      ->required();
  pipeline_cmd->callback([&] { rc = run_pipeline(pipeline_opts); });

  CLI11_PARSE(app, argc, argv);
  return rc;
}
