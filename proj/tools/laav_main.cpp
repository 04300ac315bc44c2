// Command-line front end: segment trajectories, generate synthetic scenes,
// sweep noise levels, and score label files against ground truth.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "laav/laav.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;       // parse / flag / file errors
constexpr int kExitNumeric = 3;     // degeneracy or numeric failure
constexpr int kExitNoConverge = 4;  // voting never converged within the caps

struct Options {
  std::string input;
  std::string output;
  std::string metrics;
  std::string labels;
  std::string config_file;
  std::string stage_dump;
  std::string rv_init = "atoms";

  std::uint64_t seed = 0;
  int motions = 0;
  double sigma = 0.0;

  double r1 = 20.0;
  double r2 = 40.0;
  double lambda_vote = 4.0;
  double lambda_affinity = 0.5;
  double alpha = 0.9;
  int m = 12;

  // synth / bench scene
  std::string features = "80,80";
  int frames = 16;
  std::string kinds;
  double fov = 640.0 * 480.0;

  // bench
  std::string sigmas = "0,0.5,1,2";
  int reps = 10;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

laav::PipelineConfig pipeline_config(const Options& opt) {
  laav::PipelineConfig cfg;
  cfg.seed = opt.seed;
  cfg.num_motions = opt.motions;
  cfg.atoms.r1 = opt.r1;
  cfg.atoms.r2 = opt.r2;
  cfg.voting.lambda_vote = opt.lambda_vote;
  cfg.voting.lambda_affinity = opt.lambda_affinity;
  cfg.rv.lambda_vote = opt.lambda_vote;
  cfg.rv.alpha = opt.alpha;
  cfg.rv.m = opt.m;
  cfg.rv_random_init = (opt.rv_init == "random");
  return cfg;
}

laav::SceneSpec scene_spec(const Options& opt) {
  laav::SceneSpec spec;
  spec.num_motions = (opt.motions > 0) ? opt.motions : 2;
  spec.frame_count = opt.frames;
  spec.field_of_view = opt.fov;
  spec.seed = opt.seed;
  for (const std::string& tok : split(opt.features, ','))
    spec.features_per_motion.push_back(std::stoi(tok));
  if (static_cast<int>(spec.features_per_motion.size()) == 1 &&
      spec.num_motions > 1)
    spec.features_per_motion.assign(spec.num_motions,
                                    spec.features_per_motion.front());
  for (const std::string& tok : split(opt.kinds, ',')) {
    if (tok == "translation")
      spec.kinds.push_back(laav::MotionKind::Translation);
    else if (tok == "rotation")
      spec.kinds.push_back(laav::MotionKind::RotationTranslation);
    else if (tok == "drift")
      spec.kinds.push_back(laav::MotionKind::AffineDrift);
    else
      throw std::invalid_argument("unknown motion kind: " + tok);
  }
  return spec;
}

void dump_stage(const std::string& dir, const std::string& name,
                const std::vector<int>& labels) {
  laav::Labeling lab;
  lab.labels = labels;
  lab.confidence.assign(labels.size(), 0.0);
  lab.source.assign(labels.size(), laav::LabelSource::RvAssigned);
  for (std::size_t k = 0; k < labels.size(); ++k)
    if (labels[k] >= 0) {
      lab.confidence[k] = 1.0;
      lab.source[k] = laav::LabelSource::AtomDerived;
    }
  laav::save_labels((std::filesystem::path(dir) / name).string(), lab);
}

laav::Metrics run_metrics(const laav::PipelineResult& result, int c,
                          std::uint64_t seed) {
  laav::Metrics m;
  const std::string err =
      result.error_total ? laav::metric_value(*result.error_total) : "nan";
  m.emplace_back("error_total", err);
  m.emplace_back("error_2motion", c == 2 ? err : "nan");
  m.emplace_back("error_3motion", c == 3 ? err : "nan");
  m.emplace_back("iterations", std::to_string(result.iterations_used));
  m.emplace_back("converged", result.converged ? "1" : "0");
  m.emplace_back("seed", std::to_string(seed));
  return m;
}

int cmd_segment(const Options& opt) {
  laav::TrajectorySet traj = laav::load_trajectories(opt.input);
  if (opt.sigma > 0.0)
    traj = laav::add_noise(traj, {opt.sigma, laav::derive_seed(opt.seed, "noise")});

  const laav::PipelineConfig cfg = pipeline_config(opt);
  const laav::PipelineResult result = laav::run_pipeline(traj, cfg);

  laav::save_labels(opt.output, result.labeling);
  const std::string metrics_path =
      opt.metrics.empty() ? opt.output + ".metrics" : opt.metrics;
  laav::save_metrics(metrics_path, run_metrics(result, result.num_motions, opt.seed));

  if (!opt.stage_dump.empty()) {
    std::filesystem::create_directories(opt.stage_dump);
    dump_stage(opt.stage_dump, "stage_fine.labels", result.stage_fine);
    dump_stage(opt.stage_dump, "stage_coarse.labels", result.stage_coarse);
    dump_stage(opt.stage_dump, "stage_final.labels", result.labeling.labels);
  }
  return result.converged ? kExitOk : kExitNoConverge;
}

int cmd_synth(const Options& opt) {
  const laav::TrajectorySet traj = laav::synth_scene(scene_spec(opt));
  laav::save_trajectories(opt.output, traj);
  return kExitOk;
}

int cmd_eval(const Options& opt) {
  const laav::TrajectorySet traj = laav::load_trajectories(opt.input);
  const laav::Labeling labeling = laav::load_labels(opt.labels);
  if (!traj.ground_truth)
    throw std::invalid_argument("eval: trajectory file carries no ground truth");
  if (labeling.labels.size() != static_cast<std::size_t>(traj.feature_count))
    throw std::invalid_argument("eval: label count does not match trajectory file");

  const int c = (opt.motions > 0) ? opt.motions : traj.num_motions;
  const double err =
      laav::misclassification_error(labeling.labels, *traj.ground_truth, c);
  laav::Metrics m;
  m.emplace_back("error_total", laav::metric_value(err));
  m.emplace_back("error_2motion", c == 2 ? laav::metric_value(err) : "nan");
  m.emplace_back("error_3motion", c == 3 ? laav::metric_value(err) : "nan");
  if (opt.output.empty())
    laav::save_metrics(std::cout, m);
  else
    laav::save_metrics(opt.output, m);
  return kExitOk;
}

int cmd_bench_noise(const Options& opt) {
  laav::TrajectorySet base;
  if (!opt.input.empty())
    base = laav::load_trajectories(opt.input);
  else
    base = laav::synth_scene(scene_spec(opt));
  if (!base.ground_truth)
    throw std::invalid_argument("bench-noise: ground truth required");

  std::vector<double> sigmas;
  for (const std::string& tok : split(opt.sigmas, ',')) sigmas.push_back(std::stod(tok));
  if (sigmas.empty() || opt.reps < 1)
    throw std::invalid_argument("bench-noise: need sigmas and reps >= 1");

  std::ofstream os(opt.output);
  if (!os) throw std::runtime_error("cannot open for writing: " + opt.output);
  os << "sigma\trep\tarm\taccuracy\titerations\tconverged\n";

  char buf[64];
  const char* arms[2] = {"atoms", "random"};
  for (std::size_t si = 0; si < sigmas.size(); ++si) {
    const double sigma = sigmas[si];
    for (int arm = 0; arm < 2; ++arm) {
      std::vector<double> accuracies;
      std::vector<int> iterations;
      int converged_count = 0;
      for (int rep = 0; rep < opt.reps; ++rep) {
        const std::string tag = "bench-" + std::to_string(si) + "-" +
                                std::to_string(rep) + "-" + arms[arm];
        laav::TrajectorySet noisy = laav::add_noise(
            base, {sigma, laav::derive_seed(opt.seed, tag + "-noise")});

        Options run_opt = opt;
        run_opt.rv_init = arms[arm];
        laav::PipelineConfig cfg = pipeline_config(run_opt);
        cfg.seed = laav::derive_seed(opt.seed, tag);
        const laav::PipelineResult result = laav::run_pipeline(noisy, cfg);

        const double acc = result.error_total ? 1.0 - *result.error_total
                                              : std::nan("");
        accuracies.push_back(acc);
        iterations.push_back(result.iterations_used);
        converged_count += result.converged ? 1 : 0;

        std::snprintf(buf, sizeof(buf), "%.6f", acc);
        os << laav::detail::format_double(sigma) << '\t' << rep << '\t'
           << arms[arm] << '\t' << buf << '\t' << result.iterations_used << '\t'
           << (result.converged ? 1 : 0) << '\n';
      }

      double acc_mean = 0.0, it_mean = 0.0;
      for (double a : accuracies) acc_mean += a;
      for (int it : iterations) it_mean += it;
      acc_mean /= accuracies.size();
      it_mean /= iterations.size();
      double acc_var = 0.0;
      for (double a : accuracies) acc_var += (a - acc_mean) * (a - acc_mean);
      acc_var /= accuracies.size();
      const double conv_rate =
          static_cast<double>(converged_count) / static_cast<double>(opt.reps);

      std::snprintf(buf, sizeof(buf), "%.6f\t%.2f\t%.4f", acc_mean, it_mean,
                    conv_rate);
      os << laav::detail::format_double(sigma) << "\tmean\t" << arms[arm] << '\t'
         << buf << '\n';
      std::snprintf(buf, sizeof(buf), "%.6f\t-\t-", std::sqrt(acc_var));
      os << laav::detail::format_double(sigma) << "\tstd\t" << arms[arm] << '\t'
         << buf << '\n';
    }
  }
  return kExitOk;
}

// key=value defaults, applied before flags so flags win
void apply_config_file(Options& opt) {
  if (opt.config_file.empty()) return;
  std::ifstream is(opt.config_file);
  if (!is) throw std::runtime_error("cannot open config: " + opt.config_file);
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::size_t start = line.find_first_not_of(" \t\r");
    if (start == std::string::npos || line[start] == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw laav::ParseError(line_no, "expected key=value");
    const std::string key = line.substr(start, eq - start);
    const std::string value = line.substr(eq + 1);
    if (key == "seed") opt.seed = std::stoull(value);
    else if (key == "motions") opt.motions = std::stoi(value);
    else if (key == "sigma") opt.sigma = std::stod(value);
    else if (key == "r1") opt.r1 = std::stod(value);
    else if (key == "r2") opt.r2 = std::stod(value);
    else if (key == "lambda-vote") opt.lambda_vote = std::stod(value);
    else if (key == "lambda-affinity") opt.lambda_affinity = std::stod(value);
    else if (key == "alpha") opt.alpha = std::stod(value);
    else if (key == "m") opt.m = std::stoi(value);
    else if (key == "rv-init") opt.rv_init = value;
    else if (key == "features") opt.features = value;
    else if (key == "frames") opt.frames = std::stoi(value);
    else if (key == "kinds") opt.kinds = value;
    else if (key == "fov") opt.fov = std::stod(value);
    else if (key == "sigmas") opt.sigmas = value;
    else if (key == "reps") opt.reps = std::stoi(value);
    else throw laav::ParseError(line_no, "unknown config key: " + key);
  }
}

void add_pipeline_flags(CLI::App* cmd, Options& opt) {
  cmd->add_option("--seed", opt.seed, "top-level seed; all stage seeds derive from it");
  cmd->add_option("--motions", opt.motions, "number of independent motions C");
  cmd->add_option("--r1", opt.r1, "inner exclusion radius, px");
  cmd->add_option("--r2", opt.r2, "outer atom radius, px");
  cmd->add_option("--lambda-vote", opt.lambda_vote, "voting strength");
  cmd->add_option("--lambda-affinity", opt.lambda_affinity, "affinity forgetting factor");
  cmd->add_option("--alpha", opt.alpha, "histogram decay per iteration");
  cmd->add_option("--m", opt.m, "features sampled per group");
  cmd->add_option("--rv-init", opt.rv_init, "atoms|random")
      ->check(CLI::IsMember({"atoms", "random"}));
  cmd->add_option("--config", opt.config_file, "key=value defaults file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"motion segmentation of 2D feature trajectories"};
  app.require_subcommand(1);
  Options opt;

  CLI::App* segment = app.add_subcommand("segment", "label a trajectory file");
  segment->add_option("--input", opt.input, "trajectory file")->required();
  segment->add_option("--output", opt.output, "labels file")->required();
  segment->add_option("--metrics", opt.metrics, "metrics file (default <output>.metrics)");
  segment->add_option("--sigma", opt.sigma, "Gaussian noise added before segmenting");
  segment->add_option("--stage-dump", opt.stage_dump, "directory for per-stage label snapshots");
  add_pipeline_flags(segment, opt);

  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic scene");
  synth->add_option("--output", opt.output, "trajectory file")->required();
  synth->add_option("--motions", opt.motions, "number of motions");
  synth->add_option("--features", opt.features, "per-motion feature counts, comma separated");
  synth->add_option("--frames", opt.frames, "frame count");
  synth->add_option("--kinds", opt.kinds, "per-motion kinds: translation|rotation|drift");
  synth->add_option("--fov", opt.fov, "field of view, px^2");
  synth->add_option("--seed", opt.seed, "scene seed");
  synth->add_option("--config", opt.config_file, "key=value defaults file");

  CLI::App* bench = app.add_subcommand("bench-noise", "accuracy and convergence across noise levels");
  bench->add_option("--input", opt.input, "trajectory file (default: synthetic scene)");
  bench->add_option("--output", opt.output, "TSV report")->required();
  bench->add_option("--sigmas,--sigma", opt.sigmas, "noise levels, comma separated");
  bench->add_option("--reps", opt.reps, "repetitions per level");
  bench->add_option("--features", opt.features, "per-motion feature counts");
  bench->add_option("--frames", opt.frames, "frame count");
  bench->add_option("--kinds", opt.kinds, "per-motion kinds");
  bench->add_option("--fov", opt.fov, "field of view, px^2");
  add_pipeline_flags(bench, opt);

  CLI::App* eval = app.add_subcommand("eval", "score a labels file against ground truth");
  eval->add_option("--input", opt.input, "trajectory file with ground truth")->required();
  eval->add_option("--labels", opt.labels, "labels file")->required();
  eval->add_option("--output", opt.output, "metrics file (default stdout)");
  eval->add_option("--motions", opt.motions, "motion count override");
  eval->add_option("--config", opt.config_file, "key=value defaults file");

  // config file values act as defaults, so load them before parsing flags
  for (int i = 1; i + 1 < argc; ++i)
    if (std::string(argv[i]) == "--config") opt.config_file = argv[i + 1];
  try {
    apply_config_file(opt);
  } catch (const std::exception& e) {
    std::cerr << "laav-error code=" << kExitInput << " message=\"" << e.what()
              << "\"\n";
    return kExitInput;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "laav-error code=" << kExitInput << " message=\"" << e.what()
              << "\"\n";
    return kExitInput;
  }

  auto fail = [](int code, const char* what) {
    std::cerr << "laav-error code=" << code << " message=\"" << what << "\"\n";
    return code;
  };

  try {
    if (segment->parsed()) return cmd_segment(opt);
    if (synth->parsed()) return cmd_synth(opt);
    if (bench->parsed()) return cmd_bench_noise(opt);
    if (eval->parsed()) return cmd_eval(opt);
  } catch (const laav::ParseError& e) {
    return fail(kExitInput, e.what());
  } catch (const laav::DegenerateSystem& e) {
    return fail(kExitNumeric, e.what());
  } catch (const laav::DegenerateConfiguration& e) {
    return fail(kExitNumeric, e.what());
  } catch (const laav::NoConvergence& e) {
    return fail(kExitNumeric, e.what());
  } catch (const laav::InsufficientAtoms& e) {
    return fail(kExitNumeric, e.what());
  } catch (const laav::TooLarge& e) {
    return fail(kExitInput, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(kExitInput, e.what());
  } catch (const std::runtime_error& e) {
    return fail(kExitInput, e.what());  // file and format problems
  } catch (const std::exception& e) {
    return fail(kExitNumeric, e.what());
  }
  return kExitInput;
}
