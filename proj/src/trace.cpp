// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#include "lbforecast/trace.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "lbforecast/errors.hpp"

namespace lbf {

using json = nlohmann::json;

namespace {

constexpr std::array<char, 4> kMagic = {'T', 'F', 'T', 'R'};
const std::vector<std::string> kFields = {"tap_1", "tap_B", "eps_hat"};

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffU);
  out.write(b, 4);
}

void put_f64(std::ostream& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xffU);
  out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw TraceError(std::string("truncated trace: missing ") + what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double decode_f64(const unsigned char* b) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

Trace trace_from_run(const RunResult& run, const std::string& model_hash) {
  if (run.steps.size() != static_cast<std::size_t>(run.report.num_steps)) {
    throw TraceError("run was not recorded step by step");
  }
  Trace t;
  t.model_hash = model_hash;
  t.policy = run.report.policy;
  t.blocks = run.report.num_blocks;
  for (const auto& s : run.steps) {
    t.timesteps.push_back(s.timestep);
    t.first.push_back(s.first_tap);
    t.last.push_back(s.last_tap);
    t.eps.push_back(s.eps_hat);
  }
  if (!t.first.empty()) t.tap_shape = t.first.front().shape();
  return t;
}

void write_trace(const Trace& trace, std::ostream& out) {
  const std::size_t s = trace.timesteps.size();
  if (trace.first.size() != s || trace.last.size() != s || trace.eps.size() != s) {
    throw TraceError("trace field counts differ from step count");
  }
  const std::size_t numel = shape_numel(trace.tap_shape);
  json h;
  h["version"] = kTraceVersion;
  h["model_hash"] = trace.model_hash;
  h["policy"] = trace.policy;
  h["steps"] = s;
  h["blocks"] = trace.blocks;
  h["tap_blocks"] = {1, trace.blocks};
  h["tap_shape"] = trace.tap_shape;
  h["fields"] = kFields;
  h["timesteps"] = trace.timesteps;
  h["payload_values"] = s * kFields.size() * numel;
  const std::string header = h.dump();

  out.write(kMagic.data(), kMagic.size());
  put_u32(out, kTraceVersion);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (std::size_t i = 0; i < s; ++i) {
    for (const Tensor* t : {&trace.first[i], &trace.last[i], &trace.eps[i]}) {
      if (t->shape() != trace.tap_shape) throw TraceError("tensor shape differs from trace tap shape");
      for (double v : t->data()) put_f64(out, v);
    }
  }
  if (!out) throw TraceError("failed writing trace");
}

void write_trace_file(const Trace& trace, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TraceError("cannot open " + path + " for writing");
  write_trace(trace, out);
}

Trace read_trace(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), 4) || magic != kMagic) throw TraceError("not a trace file (bad magic)");
  const std::uint32_t version = get_u32(in, "version");
  if (version != kTraceVersion) throw TraceError("unsupported trace version " + std::to_string(version));
  const std::uint32_t len = get_u32(in, "header length");
  std::string header(len, '\0');
  if (!in.read(header.data(), len)) throw TraceError("truncated trace header");

  json h;
  Trace t;
  std::size_t payload_values = 0;
  try {
    h = json::parse(header);
    t.model_hash = h.at("model_hash").get<std::string>();
    t.policy = h.at("policy").get<std::string>();
    t.blocks = h.at("blocks").get<int>();
    t.tap_shape = h.at("tap_shape").get<Shape>();
    t.timesteps = h.at("timesteps").get<std::vector<int>>();
    payload_values = h.at("payload_values").get<std::size_t>();
    if (h.at("fields").get<std::vector<std::string>>() != kFields) throw TraceError("unexpected trace fields");
    if (h.at("steps").get<std::size_t>() != t.timesteps.size()) {
      throw TraceError("header step count does not match its timestep list");
    }
  } catch (const json::exception& e) {
    throw TraceError(std::string("malformed trace header: ") + e.what());
  }

  const std::size_t numel = shape_numel(t.tap_shape);
  const std::size_t s = t.timesteps.size();
  if (numel == 0 || payload_values != s * kFields.size() * numel) {
    throw TraceError("header payload size disagrees with steps and tap shape");
  }

  std::vector<unsigned char> bytes(payload_values * 8);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw TraceError("truncated trace payload: expected " + std::to_string(bytes.size()) + " bytes, got " +
                     std::to_string(in.gcount()));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw TraceError("trailing bytes after trace payload");

  const unsigned char* p = bytes.data();
  auto next_tensor = [&] {
    std::vector<double> v(numel);
    for (auto& x : v) {
      x = decode_f64(p);
      p += 8;
    }
    return Tensor(t.tap_shape, std::move(v));
  };
  for (std::size_t i = 0; i < s; ++i) {
    t.first.push_back(next_tensor());
    t.last.push_back(next_tensor());
    t.eps.push_back(next_tensor());
  }
  return t;
}

Trace read_trace_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TraceError("cannot open trace " + path);
  return read_trace(in);
}

}  // namespace lbf
