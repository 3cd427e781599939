// Copyright 2026 The Bimodal Stereo Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bimodal/cli.hpp"

#include <cmath>
#include <cstdio>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/cfg/env.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "bimodal/errors.hpp"
#include "bimodal/geometry.hpp"
#include "bimodal/integrate.hpp"
#include "bimodal/io.hpp"
#include "bimodal/pipeline.hpp"
#include "bimodal/refine.hpp"
#include "bimodal/registration.hpp"
#include "bimodal/sfs.hpp"
#include "bimodal/synthgen.hpp"

namespace bimodal {

namespace fs = std::filesystem;

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::shared_ptr<spdlog::logger> log = [] {
    auto l = spdlog::get("bimodal");
    if (!l) l = spdlog::stderr_color_mt("bimodal");
    l->set_pattern("[%l] %v");
    spdlog::cfg::load_env_levels();
    return l;
  }();
  return log;
}

io::RunConfig run_config(const std::string& path) {
  return path.empty() ? io::RunConfig{} : io::load_run_config(path);
}

void prepare(const fs::path& out) { fs::create_directories(out); }

void finish(const fs::path& out) {
  io::write_manifest(out);
  logger()->info("wrote {}", (out / "manifest.json").string());
}

// Options shared by the subcommands, bound to CLI11 flags.
struct Args {
  std::string out;
  std::string config;
  std::string shading, depth, target_depth, lighting, normals, priors, pose;
  std::string pose_est, pose_gt;
  std::optional<std::uint64_t> seed;
  std::optional<double> prior_percentage;

  // synth / sweep
  int size = 32;
  double alpha = 0.0, beta = 20.0, gamma = 0.0;
  double overlap = 1.0;
  int stride = 1;
  double noise = 0.0;
  std::vector<double> betas;
  std::vector<double> overlaps;
};

io::RunConfig effective_config(const Args& a) {
  io::RunConfig cfg = run_config(a.config);
  if (a.seed) {
    cfg.seed = *a.seed;
    cfg.pipeline.registration.ransac.seed = *a.seed;
  }
  if (a.prior_percentage) cfg.prior_percentage = *a.prior_percentage;
  return cfg;
}

int cmd_synth(const Args& a) {
  const fs::path out = a.out;
  SynthSpec spec;
  spec.source = a.depth.empty() ? face_surface(a.size, a.size) : io::load_depth(a.depth);
  spec.lighting = a.lighting.empty() ? default_lighting() : io::load_lighting(a.lighting);
  spec.alpha_deg = a.alpha;
  spec.beta_deg = a.beta;
  spec.gamma_deg = a.gamma;
  spec.overlap = a.overlap;
  spec.stride = a.stride;
  spec.prior_percentage = a.prior_percentage.value_or(0.0);
  spec.depth_noise = a.noise;
  spec.seed = a.seed.value_or(0);
  const SynthPair pair = synthesize_pair(spec);

  prepare(out);
  io::save_depth(out / "source_depth.pfm", spec.source);
  io::save_shading(out / "shading.pfm", pair.shading);
  io::save_depth(out / "depth.pfm", pair.depth);
  io::save_lighting(out / "lighting.json", spec.lighting);
  io::save_pose(out / "pose_gt.json", pair.pose);
  io::save_normals(out / "normals_gt.pfm", pair.normals);
  io::save_normals_png(out / "normals_gt.png", pair.normals);
  logger()->info("synthesized {}x{} shading, {} depth samples", pair.shading.width(),
                 pair.shading.height(), pair.depth.z.count_valid());
  finish(out);
  return kExitOk;
}

int cmd_render(const Args& a) {
  const fs::path out = a.out;
  NormalField normals;
  if (!a.normals.empty()) {
    normals = io::load_normals(a.normals);
  } else if (!a.depth.empty()) {
    normals = depth_to_normals(io::load_depth(a.depth));
  } else {
    throw InvalidInput("render needs --normals or --depth");
  }
  prepare(out);
  io::save_normals_png(out / "normals.png", normals);
  if (!a.lighting.empty())
    io::save_shading(out / "shading.pfm",
                     render_log_shading(io::load_lighting(a.lighting), normals));
  finish(out);
  return kExitOk;
}

int cmd_sfs(const Args& a) {
  const fs::path out = a.out;
  const io::RunConfig cfg = effective_config(a);
  const LogShadingImage shading = io::load_shading(a.shading);
  const ShLighting lighting = io::load_lighting(a.lighting);
  PriorField priors;
  SfsConfig sfs = cfg.pipeline.sfs;
  if (!a.priors.empty()) {
    const NormalField p = io::load_normals(a.priors);
    priors = PriorField(p.width(), p.height(), std::vector<Vector3d>(p.values().begin(),
                                                                     p.values().end()),
                        std::vector<std::uint8_t>(p.mask().begin(), p.mask().end()));
    if (cfg.prior_percentage >= 0.0)
      sfs.prior_mask = select_prior_pixels(priors.mask(), cfg.prior_percentage, cfg.seed);
  }
  const FieldSolution sol = solve_field(shading, lighting, priors, sfs);
  logger()->info("sfs: mean objective {:.3e}, {} nonconverged", sol.mean_objective,
                 sol.nonconverged);
  prepare(out);
  io::save_normals(out / "normals.pfm", sol.normals);
  io::save_normals_png(out / "normals.png", sol.normals);
  finish(out);
  return kExitOk;
}

int cmd_integrate(const Args& a) {
  const fs::path out = a.out;
  const NormalField normals = io::load_normals(a.normals);
  const IntegrationResult r = integrate_gradients(normals_to_gradients(normals));
  logger()->info("integrate: {} components, rms residual {:.3e}", r.components, r.rms_residual);
  prepare(out);
  io::save_depth(out / "depth.pfm", r.depth);
  io::save_ply(out / "cloud.ply", depth_to_pointcloud(r.depth));
  finish(out);
  return kExitOk;
}

int cmd_register(const Args& a) {
  const fs::path out = a.out;
  const io::RunConfig cfg = effective_config(a);
  const PointCloud source = depth_to_pointcloud(io::load_depth(a.depth));
  const SampledSurface target = sample_surface(io::load_depth(a.target_depth), 1);
  std::optional<SimilarityPose> init;
  if (!a.pose.empty()) init = io::load_pose(a.pose);
  const RegistrationResult r =
      register_clouds(source, target.cloud, cfg.pipeline.registration, init, target.pixel);
  const Vector3d e = r.pose.euler_deg();
  logger()->info("register: s {:.6f} alpha {:.4f} beta {:.4f} gamma {:.4f}, {} inliers",
                 r.pose.scale(), e(0), e(1), e(2), r.inliers);
  prepare(out);
  io::save_pose(out / "pose.json", r.pose);
  io::save_ply(out / "registered.ply", apply_pose(r.pose, source));
  finish(out);
  return kExitOk;
}

int cmd_refine(const Args& a) {
  const fs::path out = a.out;
  const io::RunConfig cfg = effective_config(a);
  const DepthGrid z_r = io::load_depth(a.depth);
  const SampledSurface target = sample_surface(io::load_depth(a.target_depth), 1);
  const LogShadingImage shading = io::load_shading(a.shading);
  const ShLighting lighting = io::load_lighting(a.lighting);
  const NormalField n_est = io::load_normals(a.normals);
  const SimilarityPose pose = io::load_pose(a.pose);

  CorrespondenceSet corr =
      build_correspondences(pose, depth_to_pointcloud(z_r), target.cloud,
                            cfg.pipeline.registration.correspondence_threshold, target.pixel);
  corr = extend_to_holes(corr, z_r, pose, target);
  const NormalField n_r = depth_to_normals(z_r);
  const RefinedNormals refined =
      refine_normals(n_r, shading, lighting, pose, corr, n_est, cfg.pipeline.refine);
  logger()->info("refine: rmse {:.4e} -> {:.4e}", forward_rmse(n_r, shading, lighting, pose, corr),
                 forward_rmse(refined.normals, shading, lighting, pose, corr));
  prepare(out);
  io::save_normals(out / "normals_refined.pfm", refined.normals);
  io::save_depth(out / "depth_refined.pfm", refine_depth(refined.normals, refined.touched, z_r));
  finish(out);
  return kExitOk;
}

int cmd_run(const Args& a) {
  const fs::path out = a.out;
  io::RunConfig cfg = effective_config(a);
  const LogShadingImage shading = io::load_shading(a.shading);
  const DepthGrid z_r = io::load_depth(a.depth);
  const ShLighting lighting = io::load_lighting(a.lighting);
  if (cfg.prior_percentage >= 0.0)
    cfg.pipeline.sfs.prior_mask = select_prior_pixels(shading.mask(), cfg.prior_percentage,
                                                      cfg.seed);
  prepare(out);
  PipelineResult r;
  try {
    r = run_bimodal_stereo(shading, z_r, lighting, cfg.pipeline);
  } catch (const PipelineFailure& e) {
    io::save_trace(out / "trace.json", e.trace(), false, false, e.what());
    finish(out);
    throw;
  }
  const Vector3d e = r.pose.euler_deg();
  logger()->info("run: {} iterations, s {:.6f} alpha {:.4f} beta {:.4f} gamma {:.4f}",
                 r.trace.size(), r.pose.scale(), e(0), e(1), e(2));
  io::save_pose(out / "pose.json", r.pose);
  io::save_normals(out / "normals.pfm", r.normals);
  io::save_normals_png(out / "normals.png", r.normals);
  io::save_depth(out / "depth_est.pfm", r.depth);
  io::save_depth(out / "depth_refined.pfm", r.refined_depth);
  io::save_normals(out / "normals_refined.pfm", r.refined_normals);
  io::save_trace(out / "trace.json", r.trace, r.converged, r.diverged);
  finish(out);
  return kExitOk;
}

int cmd_eval(const Args& a) {
  const SimilarityPose est = io::load_pose(a.pose_est);
  const SimilarityPose gt = io::load_pose(a.pose_gt);
  const double err = rotation_error(est.rotation(), gt.rotation());
  std::printf("rotation_error %.9g\n", err);
  if (!a.out.empty()) {
    const fs::path out = a.out;
    prepare(out);
    const Vector3d d = est.euler_deg() - gt.euler_deg();
    std::FILE* f = std::fopen((out / "eval.json").string().c_str(), "wb");
    if (!f) throw FormatError("cannot write eval.json");
    std::fprintf(f,
                 "{\n  \"rotation_error\": %.17g,\n  \"scale_error\": %.17g,\n"
                 "  \"euler_error_deg\": [%.17g, %.17g, %.17g]\n}\n",
                 err, est.scale() - gt.scale(), d(0), d(1), d(2));
    std::fclose(f);
    finish(out);
  }
  return kExitOk;
}

int cmd_sweep(const Args& a) {
  const fs::path out = a.out;
  const io::RunConfig cfg = effective_config(a);
  SweepConfig sc;
  sc.pipeline = cfg.pipeline;
  sc.stride = a.stride;
  sc.depth_noise = a.noise;
  sc.seed = cfg.seed;
  const DepthGrid source = a.depth.empty() ? face_surface(a.size, a.size) : io::load_depth(a.depth);
  const ShLighting lighting = a.lighting.empty() ? default_lighting() : io::load_lighting(a.lighting);
  const SweepTable table = run_sweep(source, lighting, a.betas, a.overlaps, sc);
  for (const auto& c : table.cells) {
    if (c.failed) {
      logger()->info("beta {} P_w {}: FAIL ({})", c.beta_deg, c.overlap, c.message);
    } else {
      logger()->info("beta {} P_w {}: error {:.6f} in {} iterations", c.beta_deg, c.overlap,
                     c.error, c.iterations);
    }
  }
  prepare(out);
  io::save_sweep_csv(out / "sweep.csv", table);
  io::save_sweep_json(out / "sweep.json", table);
  finish(out);
  return kExitOk;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"Joint shape and pose from a log-shading image and a depth map"};
  app.require_subcommand(1);
  Args a;

  auto existing = [](CLI::Option* o) { return o->check(CLI::ExistingFile); };
  auto add_out = [&](CLI::App* s) { s->add_option("--out", a.out, "output directory")->required(); };
  auto add_config = [&](CLI::App* s) {
    existing(s->add_option("--config", a.config, "JSON configuration"));
    s->add_option("--seed", a.seed, "global seed");
  };

  auto* synth = app.add_subcommand("synth", "render a synthetic shading/depth pair");
  add_out(synth);
  existing(synth->add_option("--source", a.depth, "source depth map (default: built-in face)"));
  existing(synth->add_option("--lighting", a.lighting, "SH lighting"));
  synth->add_option("--size", a.size, "side of the built-in surface")->check(CLI::Range(4, 4096));
  synth->add_option("--alpha", a.alpha, "rotation about x, degrees");
  synth->add_option("--beta", a.beta, "rotation about y, degrees");
  synth->add_option("--gamma", a.gamma, "rotation about z, degrees");
  synth->add_option("--pw", a.overlap, "overlap width P_w");
  synth->add_option("--stride", a.stride, "depth subsampling stride");
  synth->add_option("--prior-percentage", a.prior_percentage, "P_er");
  synth->add_option("--noise", a.noise, "depth noise standard deviation");
  synth->add_option("--seed", a.seed, "global seed");

  auto* render = app.add_subcommand("render", "normal map PNG and optional log-shading");
  add_out(render);
  existing(render->add_option("--normals", a.normals, "normal field (PFM)"));
  existing(render->add_option("--depth", a.depth, "depth map; normals taken from it"));
  existing(render->add_option("--lighting", a.lighting, "SH lighting"));

  auto* sfs = app.add_subcommand("sfs", "per-pixel shape from shading");
  add_out(sfs);
  add_config(sfs);
  existing(sfs->add_option("--shading", a.shading, "log-shading image")->required());
  existing(sfs->add_option("--lighting", a.lighting, "SH lighting")->required());
  existing(sfs->add_option("--priors", a.priors, "prior normals (PFM)"));
  sfs->add_option("--prior-percentage", a.prior_percentage, "fraction of priors used");

  auto* integ = app.add_subcommand("integrate", "depth from a normal field");
  add_out(integ);
  existing(integ->add_option("--normals", a.normals, "normal field (PFM)")->required());

  auto* reg = app.add_subcommand("register", "similarity between two depth maps");
  add_out(reg);
  add_config(reg);
  existing(reg->add_option("--depth", a.depth, "depth map to move")->required());
  existing(reg->add_option("--target-depth", a.target_depth, "fixed depth map")->required());
  existing(reg->add_option("--init", a.pose, "initial pose (skips multi-start)"));

  auto* refine = app.add_subcommand("refine", "photometric refinement of the depth map");
  add_out(refine);
  add_config(refine);
  existing(refine->add_option("--depth", a.depth, "depth map z_R")->required());
  existing(refine->add_option("--target-depth", a.target_depth, "color-side depth z*")->required());
  existing(refine->add_option("--normals", a.normals, "color-side normals n*")->required());
  existing(refine->add_option("--shading", a.shading, "log-shading image")->required());
  existing(refine->add_option("--lighting", a.lighting, "SH lighting")->required());
  existing(refine->add_option("--pose", a.pose, "pose mapping z_R onto z*")->required());

  auto* run = app.add_subcommand("run", "full alternating pipeline");
  add_out(run);
  add_config(run);
  existing(run->add_option("--shading", a.shading, "log-shading image")->required());
  existing(run->add_option("--depth", a.depth, "depth map")->required());
  existing(run->add_option("--lighting", a.lighting, "SH lighting")->required());
  run->add_option("--prior-percentage", a.prior_percentage, "P_er");

  auto* eval = app.add_subcommand("eval", "rotation error between two poses");
  existing(eval->add_option("--pose-est", a.pose_est, "estimated pose")->required());
  existing(eval->add_option("--pose-gt", a.pose_gt, "ground-truth pose")->required());
  eval->add_option("--out", a.out, "also write eval.json here");

  auto* sweep = app.add_subcommand("sweep", "rotation by overlap grid on the synthetic scene");
  add_out(sweep);
  add_config(sweep);
  sweep->add_option("--betas", a.betas, "rotations about y, degrees")->delimiter(',')->required();
  sweep->add_option("--pw", a.overlaps, "overlap widths")->delimiter(',')->required();
  existing(sweep->add_option("--source", a.depth, "source depth map"));
  existing(sweep->add_option("--lighting", a.lighting, "SH lighting"));
  sweep->add_option("--size", a.size, "side of the built-in surface")->check(CLI::Range(4, 4096));
  sweep->add_option("--stride", a.stride, "depth subsampling stride");
  sweep->add_option("--noise", a.noise, "depth noise standard deviation");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(a);
    if (*render) return cmd_render(a);
    if (*sfs) return cmd_sfs(a);
    if (*integ) return cmd_integrate(a);
    if (*reg) return cmd_register(a);
    if (*refine) return cmd_refine(a);
    if (*run) return cmd_run(a);
    if (*eval) return cmd_eval(a);
    if (*sweep) return cmd_sweep(a);
  } catch (const RegistrationFailure& e) {
    logger()->error("registration failed: {}", e.what());
    return kExitRegistration;
  } catch (const InvalidInput& e) {
    logger()->error("{}", e.what());
    return kExitConfig;
  } catch (const FormatError& e) {
    logger()->error("{}", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}

int cli_dispatch(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& s : args) argv.push_back(s.c_str());
  return cli_dispatch(static_cast<int>(argv.size()), argv.data());
}

}  // namespace bimodal
