#pragma once

// Two-state worked example: fixed real and nominal matrices with seeded inputs and noise.

#include <string>
#include <vector>

#include "leo/io.hpp"

namespace leo {

struct DemoFixture {
  TrueSystem truth;
  LtiParams nominal;
  Vector x0_hat;
};

inline DemoFixture demo_fixture() {
  DemoFixture f;
  Matrix A(2, 2), B(2, 1), C(1, 2), A0(2, 2), B0(2, 1), C0(1, 2);
  A << 1.02, 0.68, -0.68, 0.34;
  B << 1.5, 0.7;
  C << 1.0, 0.0;
  A0 << 1.0368, 0.6864, -0.6683, 0.3515;
  B0 << 1.4439, 0.6907;
  C0 << 1.1104, -0.0319;
  f.truth.real = {A, B, C};
  f.truth.x0_real = (Vector(2) << 0.4617, 0.2674).finished();
  f.nominal = {A0, B0, C0};
  f.truth.delta_A = A - A0;
  f.truth.delta_B = B - B0;
  f.truth.delta_C = C - C0;
  f.x0_hat = (Vector(2) << 5.8107, 8.3609).finished();
  return f;
}

/// Fixture plus inputs u ~ N(0, 1), w ~ N(0, 0.01 I), v ~ N(0, 0.01) from RngStream(seed, 0).
inline PipelineInput demo_input(std::uint64_t seed, Eigen::Index horizon = 260) {
  const DemoFixture f = demo_fixture();
  RngStream rng(seed, 0);
  PipelineInput in;
  in.truth = f.truth;
  in.nominal = f.nominal;
  in.x0_hat = f.x0_hat;
  in.horizon = horizon;
  in.inputs = rng.normal_matrix(1, horizon + 1, 1.0);
  in.noise.w = rng.normal_matrix(2, horizon + 1, 0.1);
  in.noise.v = rng.normal_matrix(1, horizon + 1, 0.1);
  return in;
}

/// Per-step plot data: inputs, noise, real and estimated states and componentwise
/// normalized errors |(x^ - x) / x| of the four observers.
inline std::string demo_csv(const PipelineInput& in, const PipelineOutput& out) {
  const Eigen::Index n = in.truth.real.n(), p = in.truth.real.p(), q = in.truth.real.q();
  auto indexed = [](const std::string& base, Eigen::Index count, Eigen::Index i) {
    return count == 1 ? base : base + std::to_string(i + 1);
  };
  const std::vector<std::pair<std::string, const Trajectory*>> estimates = {
      {"open_nom", &out.open_nominal},
      {"open_enh", &out.open_enhanced},
      {"luen_nom", &out.luenberger_nominal},
      {"luen_enh", &out.luenberger_enhanced}};

  std::vector<std::string> header{"k"};
  for (Eigen::Index i = 0; i < p; ++i) header.push_back(indexed("u", p, i));
  for (Eigen::Index i = 0; i < q; ++i) header.push_back(indexed("v", q, i));
  for (Eigen::Index i = 0; i < n; ++i) header.push_back("w" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::string x = "x" + std::to_string(i + 1) + "_";
    header.push_back(x + "real");
    for (const auto& e : estimates) header.push_back(x + e.first);
  }
  for (Eigen::Index i = 0; i < n; ++i)
    for (const auto& e : estimates) header.push_back("e" + std::to_string(i + 1) + "_" + e.first);

  io::CsvWriter csv(header);
  using io::format_number;
  for (Eigen::Index k = 0; k <= in.horizon; ++k) {
    std::vector<std::string> row{std::to_string(k)};
    for (Eigen::Index i = 0; i < p; ++i) row.push_back(format_number(in.inputs(i, k)));
    for (Eigen::Index i = 0; i < q; ++i) row.push_back(format_number(in.noise.v(i, k)));
    for (Eigen::Index i = 0; i < n; ++i) row.push_back(format_number(in.noise.w(i, k)));
    for (Eigen::Index i = 0; i < n; ++i) {
      row.push_back(format_number(out.real.states(i, k)));
      for (const auto& e : estimates) row.push_back(format_number(e.second->states(i, k)));
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const double x = out.real.states(i, k);
      for (const auto& e : estimates) row.push_back(format_number(std::abs((e.second->states(i, k) - x) / x)));
    }
    csv.row(row);
  }
  return csv.str();
}

}  // namespace leo
