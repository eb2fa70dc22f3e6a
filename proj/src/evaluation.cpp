#include "roadreg/evaluation.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <random>

#include "roadreg/cloud_io.hpp"
#include "roadreg/error.hpp"

namespace roadreg {
namespace {

double yaw_of(const Pose& p) { return rpy_of(p.rotation_matrix())[2]; }

}  // namespace

LocalizationError pose_error(const Pose& estimate, const Pose& truth) {
  LocalizationError e;
  const Eigen::Vector3d d = estimate.translation - truth.translation;
  e.dx = d.x();
  e.dy = d.y();
  e.dz = d.z();
  e.d2d = std::hypot(d.x(), d.y());
  const Eigen::Matrix3d relative = truth.rotation_matrix().transpose() * estimate.rotation_matrix();
  const Eigen::Vector3d rpy = rpy_of(relative);
  e.roll = rad2deg(rpy[0]);
  e.pitch = rad2deg(rpy[1]);
  e.yaw = rad2deg(rpy[2]);
  return e;
}

void validate(const SweepParams& params) {
  if (params.n_seeds < 1) throw ConfigError("evaluation: n_seeds must be >= 1");
  if (!(params.seed_radius >= 0.0)) throw ConfigError("evaluation: seed_radius must be >= 0");
  if (!(params.yaw_spread_deg >= 0.0 && params.yaw_spread_deg <= 180.0)) {
    throw ConfigError("evaluation: yaw_spread_deg must be in [0, 180]");
  }
}

std::vector<Pose> sweep_seeds(const SweepCase& c, std::size_t case_index,
                              const SweepParams& params) {
  std::seed_seq seq{static_cast<std::uint32_t>(params.seed),
                    static_cast<std::uint32_t>(params.seed >> 32),
                    static_cast<std::uint32_t>(case_index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double hint_yaw = deg2rad(compass_yaw_deg(c.heading_hint));
  const double spread = deg2rad(params.yaw_spread_deg);
  std::vector<Pose> seeds;
  seeds.reserve(params.n_seeds);
  for (std::int32_t i = 0; i < params.n_seeds; ++i) {
    // sqrt of a uniform radius fraction gives uniform density over the disc.
    const double r = params.seed_radius * std::sqrt(unit(rng));
    const double phi = 2.0 * std::numbers::pi * unit(rng);
    const double yaw = hint_yaw + spread * (2.0 * unit(rng) - 1.0);
    const Eigen::Vector3d t(c.truth.translation.x() + r * std::cos(phi),
                            c.truth.translation.y() + r * std::sin(phi), c.height_hint);
    seeds.push_back(Pose::from_xyz_rpy(t, 0.0, 0.0, wrap_angle(yaw)));
  }
  return seeds;
}

SweepReport run_seed_sweep(std::span<const SweepCase> cases, const KdTree& target,
                           const SweepParams& params, const MultiscaleParams& icp_params) {
  validate(params);
  SweepReport report;
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const SweepCase& c = cases[ci];
    const auto seeds = sweep_seeds(c, ci, params);
    std::vector<SweepRow> rows(seeds.size());
    const auto n = static_cast<std::int64_t>(seeds.size());
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t i = 0; i < n; ++i) {
      SweepRow& row = rows[i];
      row.sensor_id = c.sensor_id;
      row.seed_index = static_cast<std::int32_t>(i);
      row.init = seeds[i];
      row.estimate = seeds[i];
      try {
        const IcpResult r = multiscale_icp(c.source, target, seeds[i], icp_params);
        row.estimate = r.transform;
        row.fitness = r.fitness;
        row.rmse = r.inlier_rmse;
        row.iterations = r.iterations;
        row.converged = r.converged;
      } catch (const std::exception& e) {
        row.failure = e.what();
      }
      row.error = pose_error(row.estimate, c.truth);
    }
    report.summaries.push_back(summarize(rows, c.sensor_id));
    std::move(rows.begin(), rows.end(), std::back_inserter(report.rows));
  }
  return report;
}

SweepSummary summarize(std::span<const SweepRow> rows, const std::string& sensor_id) {
  SweepSummary s;
  s.sensor_id = sensor_id;
  std::vector<Eigen::Vector2d> converged;
  for (const auto& r : rows) {
    if (r.sensor_id != sensor_id) continue;
    ++s.runs;
    if (!r.failure.empty()) {
      ++s.failures;
    } else {
      converged.push_back(r.estimate.translation.head<2>());
    }
    s.mean_abs_dx += std::abs(r.error.dx);
    s.mean_abs_dy += std::abs(r.error.dy);
    s.mean_abs_dz += std::abs(r.error.dz);
    s.mean_d2d += r.error.d2d;
    s.mean_abs_roll += std::abs(r.error.roll);
    s.mean_abs_pitch += std::abs(r.error.pitch);
    s.mean_abs_yaw += std::abs(r.error.yaw);
  }
  if (s.runs > 0) {
    const double n = s.runs;
    s.mean_abs_dx /= n;
    s.mean_abs_dy /= n;
    s.mean_abs_dz /= n;
    s.mean_d2d /= n;
    s.mean_abs_roll /= n;
    s.mean_abs_pitch /= n;
    s.mean_abs_yaw /= n;
  }
  for (std::size_t i = 0; i < converged.size(); ++i) {
    for (std::size_t j = i + 1; j < converged.size(); ++j) {
      s.spread = std::max(s.spread, (converged[i] - converged[j]).norm());
    }
  }
  return s;
}

void write_error_table(std::ostream& out, const SweepReport& report) {
  const auto f = [](double v) { return format_double(v); };
  out << "sensor_id,seed,init_x,init_y,init_yaw_deg,x,y,z,yaw_deg,dx,dy,dz,d2d,"
         "roll_err_deg,pitch_err_deg,yaw_err_deg,fitness,rmse,iterations,status\n";
  for (const auto& r : report.rows) {
    const auto& e = r.error;
    out << r.sensor_id << ',' << r.seed_index << ',' << f(r.init.translation.x()) << ','
        << f(r.init.translation.y()) << ',' << f(rad2deg(yaw_of(r.init))) << ','
        << f(r.estimate.translation.x()) << ',' << f(r.estimate.translation.y()) << ','
        << f(r.estimate.translation.z()) << ',' << f(rad2deg(yaw_of(r.estimate))) << ','
        << f(e.dx) << ',' << f(e.dy) << ',' << f(e.dz) << ',' << f(e.d2d) << ',' << f(e.roll)
        << ',' << f(e.pitch) << ',' << f(e.yaw) << ',' << f(r.fitness) << ',' << f(r.rmse) << ','
        << r.iterations << ','
        << (!r.failure.empty() ? "failed" : (r.converged ? "converged" : "max_iterations"))
        << '\n';
  }
  for (const auto& s : report.summaries) {
    out << s.sensor_id << ",mean,,,,,,,," << f(s.mean_abs_dx) << ',' << f(s.mean_abs_dy) << ','
        << f(s.mean_abs_dz) << ',' << f(s.mean_d2d) << ',' << f(s.mean_abs_roll) << ','
        << f(s.mean_abs_pitch) << ',' << f(s.mean_abs_yaw) << ",,,," << s.failures
        << " failed of " << s.runs << '\n';
  }
}

void write_scatter(std::ostream& out, const SweepReport& report) {
  out << "sensor_id,seed,init_x,init_y,x,y\n";
  for (const auto& r : report.rows) {
    out << r.sensor_id << ',' << r.seed_index << ',' << format_double(r.init.translation.x())
        << ',' << format_double(r.init.translation.y()) << ','
        << format_double(r.estimate.translation.x()) << ','
        << format_double(r.estimate.translation.y()) << '\n';
  }
}

}  // namespace roadreg
