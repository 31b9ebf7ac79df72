// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <sstream>
#include <string>

#include "doctest.h"
#include "lbforecast/errors.hpp"
#include "lbforecast/trace.hpp"

using lbf::Tensor;
using lbf::Trace;

namespace {

Trace sample_trace() {
  Trace t;
  t.model_hash = "0123456789abcdef";
  t.policy = "full";
  t.blocks = 3;
  t.tap_shape = {2, 3};
  lbf::Rng rng(1);
  for (int i = 0; i < 4; ++i) {
    t.timesteps.push_back(90 - 20 * i);
    t.first.push_back(lbf::gaussian(rng, t.tap_shape, 1.0));
    t.last.push_back(lbf::gaussian(rng, t.tap_shape, 1.0));
    t.eps.push_back(lbf::gaussian(rng, t.tap_shape, 1.0));
  }
  return t;
}

std::string bytes_of(const Trace& t) {
  std::ostringstream out;
  lbf::write_trace(t, out);
  return out.str();
}

Trace parse(const std::string& bytes) {
  std::istringstream in(bytes);
  return lbf::read_trace(in);
}

}  // namespace

TEST_CASE("trace round trip is value exact") {
  const Trace t = sample_trace();
  const std::string bytes = bytes_of(t);
  CHECK(bytes.substr(0, 4) == "TFTR");
  CHECK(static_cast<unsigned char>(bytes[4]) == 1);
  const Trace back = parse(bytes);
  CHECK(back.model_hash == t.model_hash);
  CHECK(back.policy == t.policy);
  CHECK(back.blocks == 3);
  CHECK(back.timesteps == t.timesteps);
  CHECK(back.first == t.first);
  CHECK(back.last == t.last);
  CHECK(back.eps == t.eps);
  CHECK(bytes_of(back) == bytes);
}

TEST_CASE("payload is little-endian f64 after the header") {
  const Trace t = sample_trace();
  const std::string bytes = bytes_of(t);
  std::uint32_t len = 0;
  for (int i = 0; i < 4; ++i) len |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[8 + i])) << (8 * i);
  CHECK(bytes.size() == 12 + len + 4 * 3 * 6 * 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) {
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[12 + len + i])) << (8 * i);
  }
  CHECK(std::bit_cast<double>(bits) == t.first[0][0]);
}

TEST_CASE("corrupt traces are rejected") {
  const std::string good = bytes_of(sample_trace());
  CHECK_THROWS_AS(parse("XXXX" + good.substr(4)), lbf::TraceError);
  std::string v2 = good;
  v2[4] = 2;
  CHECK_THROWS_AS(parse(v2), lbf::TraceError);
  CHECK_THROWS_AS(parse(good.substr(0, good.size() - 1)), lbf::TraceError);
  CHECK_THROWS_AS(parse(good + "x"), lbf::TraceError);
  CHECK_THROWS_AS(parse(good.substr(0, 10)), lbf::TraceError);
  std::string bad_header = good;
  bad_header[12] = '[';
  CHECK_THROWS_AS(parse(bad_header), lbf::TraceError);
  CHECK_THROWS_AS(lbf::read_trace_file("/nonexistent/trace.tftr"), lbf::TraceError);
}

TEST_CASE("writer checks consistency") {
  Trace t = sample_trace();
  t.eps.pop_back();
  std::ostringstream out;
  CHECK_THROWS_AS(lbf::write_trace(t, out), lbf::TraceError);
  t = sample_trace();
  t.last[1] = Tensor({3, 2});
  CHECK_THROWS_AS(lbf::write_trace(t, out), lbf::TraceError);
}
