// Copyright 2026 The lbforecast Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lbforecast/errors.hpp"
#include "lbforecast/harness.hpp"

namespace py = pybind11;
using namespace lbf;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const Array& a) {
  Shape shape(a.shape(), a.shape() + a.ndim());
  return Tensor(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  Array out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::dict report_dict(const RunReport& r) {
  py::dict d;
  d["policy"] = r.policy;
  d["num_blocks"] = r.num_blocks;
  d["num_steps"] = r.num_steps;
  d["total_flops"] = r.total_flops;
  d["baseline_flops"] = r.baseline_flops;
  d["speedup_flops"] = r.speedup_flops;
  d["skip_fraction"] = r.skip_fraction;
  d["fallback_rate"] = r.fallback_rate;
  d["peak_cache_slots"] = r.peak_cache_slots;
  py::list decisions;
  for (const auto& s : r.decisions) decisions.append(std::string(to_string(s.decision)));
  d["decisions"] = decisions;
  d["final_latent"] = to_array(r.final_latent);
  return d;
}

ForecastMode mode_arg(const std::string& s) {
  const auto m = parse_forecast_mode(s);
  if (!m) throw ParameterError("unknown forecast mode '" + s + "'");
  return *m;
}

NormKind norm_arg(const std::string& s) {
  const auto n = parse_norm_kind(s);
  if (!n) throw ParameterError("unknown norm '" + s + "'");
  return *n;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Block-output forecasting for a toy diffusion transformer";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<DimensionError>(m, "DimensionError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<OrderingError>(m, "OrderingError", base.ptr());
  py::register_exception<StateError>(m, "StateError", base.ptr());
  py::register_exception<DegenerateInputError>(m, "DegenerateInputError", base.ptr());
  py::register_exception<SingularityError>(m, "SingularityError", base.ptr());
  py::register_exception<TraceError>(m, "TraceError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());

  py::class_<TaylorCache>(m, "TaylorCache")
      .def(py::init([](int order, const std::string& mode, double nominal_gap) {
             return TaylorCache(order, mode_arg(mode), nominal_gap);
           }),
           py::arg("order"), py::arg("mode") = "divided-difference", py::arg("nominal_gap") = 1.0)
      .def("update", [](TaylorCache& c, double t, const Array& f) { c.update(t, to_tensor(f)); })
      .def("predict", [](const TaylorCache& c, double t) { return to_array(c.predict(t)); })
      .def_property_readonly("order", &TaylorCache::order)
      .def_property_readonly("effective_order", &TaylorCache::effective_order)
      .def_property_readonly("slot_count", &TaylorCache::slot_count)
      .def("__len__", [](const TaylorCache& c) { return c.anchors().size(); });

  m.def(
      "rel_error",
      [](const Array& pred, const Array& truth, const std::string& norm) {
        return rel_error(to_tensor(pred), to_tensor(truth), norm_arg(norm));
      },
      py::arg("pred"), py::arg("truth"), py::arg("norm") = "relative-L2");

  m.def("add_noise", [](const Array& x0, const Array& eps, double abar) {
    return to_array(add_noise(to_tensor(x0), to_tensor(eps), abar));
  });
  m.def("estimate_x0", [](const Array& xt, const Array& eps, double abar) {
    return to_array(estimate_x0(to_tensor(xt), to_tensor(eps), abar));
  });
  m.def("ddim_step", [](const Array& xt, const Array& eps, double abar_t, double abar_prev) {
    return to_array(ddim_step(to_tensor(xt), to_tensor(eps), abar_t, abar_prev));
  });

  m.def("psnr", [](const Array& a, const Array& b, double range) { return psnr(to_tensor(a), to_tensor(b), range); });
  m.def("ssim", [](const Array& a, const Array& b, double range) { return ssim(to_tensor(a), to_tensor(b), range); });
  m.def("pearson", [](std::vector<double> xs, std::vector<double> ys) { return pearson(xs, ys); });
  m.def("spearman", [](std::vector<double> xs, std::vector<double> ys) { return spearman(xs, ys); });

  m.def(
      "run",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = parse_config(config_json);
        const ToyDiTModel model(cfg.model);
        const NoiseSchedule schedule = make_schedule(cfg.schedule.total_steps, cfg.schedule.sample_steps,
                                                     cfg.schedule.beta_start, cfg.schedule.beta_end);
        RunResult r;
        {
          py::gil_scoped_release release;
          r = run_policy(model, schedule, cfg.policy, initial_latent(cfg), cfg.class_id);
        }
        return report_dict(r.report);
      },
      py::arg("config_json") = "{}", "Sample once with the configured policy; returns the run report as a dict.");
  m.def(
      "run_report_json",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = parse_config(config_json);
        py::gil_scoped_release release;
        return cmd_run(cfg).report_json;
      },
      py::arg("config_json") = "{}");
  m.def(
      "bench_csv",
      [](const std::string& config_json) {
        const ExperimentConfig cfg = parse_config(config_json);
        py::gil_scoped_release release;
        return cmd_bench(cfg).csv;
      },
      py::arg("config_json"));
  m.def(
      "trace_eval_csv",
      [](const std::string& path, const std::string& config_json) {
        const ExperimentConfig cfg = parse_config(config_json);
        py::gil_scoped_release release;
        return cmd_trace_eval(path, cfg.analysis).csv;
      },
      py::arg("trace_path"), py::arg("config_json") = "{}");
  m.def("canonical_config", [](const std::string& config_json) { return config_to_json(parse_config(config_json)); });

  m.def("flops_full_step", [](const std::string& config_json) {
    return flops_full_step(parse_config(config_json).model);
  });
}
