// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "doctest.h"
#include "lbforecast/errors.hpp"
#include "lbforecast/sampler.hpp"

using lbf::Tensor;

namespace {

Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

}  // namespace

TEST_CASE("schedule construction") {
  const auto one = lbf::make_schedule(1, 1, 0.5, 0.5);
  REQUIRE(one.alphas_bar.size() == 1);
  CHECK(one.alphas_bar[0] == 0.5);

  const auto s = lbf::make_schedule(1000, 50);
  REQUIRE(s.num_sample_steps() == 50);
  CHECK(s.sample_steps.front() == 999);
  CHECK(s.sample_steps.back() == 19);
  for (std::size_t i = 1; i < s.sample_steps.size(); ++i) CHECK(s.sample_steps[i] < s.sample_steps[i - 1]);
  for (std::size_t t = 1; t < s.alphas_bar.size(); ++t) CHECK(s.alphas_bar[t] < s.alphas_bar[t - 1]);
  CHECK(s.abar_prev(49) == 1.0);
  CHECK(s.abar_prev(0) == s.abar_at(979));

  const auto all = lbf::make_schedule(20, 20);
  for (int i = 0; i < 20; ++i) CHECK(all.sample_steps[static_cast<std::size_t>(i)] == 19 - i);

  CHECK_THROWS_AS(lbf::make_schedule(10, 11), lbf::ParameterError);
  CHECK_THROWS_AS(lbf::make_schedule(0, 0), lbf::ParameterError);
  CHECK_THROWS_AS(lbf::make_schedule(10, 5, 0.2, 0.1), lbf::ParameterError);
}

TEST_CASE("add_noise and estimate_x0") {
  CHECK(lbf::add_noise(scalar(0.3), scalar(7.0), 1.0)[0] == 0.3);
  CHECK(lbf::add_noise(scalar(0.3), scalar(7.0), 0.0)[0] == 7.0);
  const double hand = 0.25 + std::sqrt(0.75);
  CHECK(std::abs(lbf::add_noise(scalar(0.5), scalar(1.0), 0.25)[0] - hand) < 1e-15);
  CHECK(std::abs(lbf::estimate_x0(scalar(hand), scalar(1.0), 0.25)[0] - 0.5) < 1e-12);
  CHECK(std::abs(lbf::estimate_x0(scalar(1.116025), scalar(1.0), 0.25)[0] - 0.5) < 1e-6);
  CHECK_THROWS_AS(lbf::estimate_x0(scalar(1.0), scalar(1.0), 0.0), lbf::SingularityError);
}

TEST_CASE("ddim_step") {
  const Tensor x = scalar(1.116025);
  const Tensor e = scalar(1.0);
  CHECK(lbf::ddim_step(x, e, 0.25, 0.25) == x);
  CHECK(lbf::ddim_step(x, e, 0.25, 1.0) == lbf::estimate_x0(x, e, 0.25));
  const double x0 = (1.116025 - std::sqrt(0.75)) / 0.5;
  const double hand = 0.9 * x0 + std::sqrt(0.19);
  CHECK(std::abs(lbf::ddim_step(x, e, 0.25, 0.81)[0] - hand) < 1e-12);
  CHECK(std::abs(lbf::ddim_step(scalar(0.25 + std::sqrt(0.75)), e, 0.25, 0.81)[0] - 0.885890) < 1e-6);
}

TEST_CASE("run_sampling visits every step once in order") {
  const auto s = lbf::make_schedule(100, 10);
  std::vector<int> seen;
  const Tensor out = lbf::run_sampling(s, scalar(1.0), [&](int i, int t, const Tensor&) {
    CHECK(t == s.sample_steps[static_cast<std::size_t>(i)]);
    seen.push_back(i);
    return scalar(0.0);
  });
  CHECK(seen.size() == 10);
  CHECK(lbf::all_finite(out));

  const auto one = lbf::make_schedule(1, 1, 0.5, 0.5);
  int calls = 0;
  lbf::run_sampling(one, scalar(1.0), [&](int, int, const Tensor&) {
    ++calls;
    return scalar(0.0);
  });
  CHECK(calls == 1);
}

TEST_CASE("add_noise / estimate_x0 round trip") {
  lbf::Rng rng(11);
  for (int i = 0; i < 100; ++i) {
    const Tensor x0 = lbf::gaussian(rng, {4, 4}, 1.0);
    const Tensor eps = lbf::gaussian(rng, {4, 4}, 1.0);
    const double abar = 0.01 + 0.98 * rng.next_unit();
    const Tensor back = lbf::estimate_x0(lbf::add_noise(x0, eps, abar), eps, abar);
    CHECK(lbf::norm_l2(lbf::sub(back, x0)) / lbf::norm_l2(x0) <= 1e-12);
  }
}
