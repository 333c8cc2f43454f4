#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "qjump/cli.hpp"
#include "qjump/estimate.hpp"
#include "qjump/filter.hpp"
#include "qjump/hmm.hpp"
#include "qjump/io.hpp"
#include "qjump/markov.hpp"
#include "qjump/physics.hpp"
#include "qjump/signal.hpp"
#include "qjump/simulate.hpp"

namespace py = pybind11;
using namespace qjump;

PYBIND11_MODULE(_qjump, m) {
  m.doc() = "Quantum-jump telegraph simulation and inference toolkit";

  // physics
  py::class_<physics::CavityParams>(m, "CavityParams")
      .def(py::init([](double g0, double kappa, double gamma, double waist) {
             physics::CavityParams p{g0, kappa, gamma, waist};
             p.validate();
             return p;
           }),
           py::arg("g0"), py::arg("kappa"), py::arg("gamma"), py::arg("waist"))
      .def_readwrite("g0", &physics::CavityParams::g0)
      .def_readwrite("kappa", &physics::CavityParams::kappa)
      .def_readwrite("gamma", &physics::CavityParams::gamma)
      .def_readwrite("waist", &physics::CavityParams::waist)
      .def("cooperativity", &physics::CavityParams::cooperativity);
  m.def("mhz_to_angular", &physics::mhz_to_angular, py::arg("mhz"));
  m.def("angular_to_mhz", &physics::angular_to_mhz, py::arg("w"));
  m.def(
      "transmission_one_atom",
      [](const physics::CavityParams& p, double delta_ca, double g_eff) {
        return physics::transmission_one_atom(p, {delta_ca, g_eff});
      },
      py::arg("params"), py::arg("delta_ca"), py::arg("g_eff"));
  m.def(
      "transmission_dispersive",
      [](const physics::CavityParams& p, double delta_ca, double g_eff, int n_atoms) {
        return physics::transmission_dispersive(p, {delta_ca, g_eff}, n_atoms);
      },
      py::arg("params"), py::arg("delta_ca"), py::arg("g_eff"), py::arg("n_atoms"));
  m.def(
      "level_difference",
      [](const physics::CavityParams& p, double delta_ca, double g_eff) {
        return physics::level_difference(p, {delta_ca, g_eff});
      },
      py::arg("params"), py::arg("delta_ca"), py::arg("g_eff"));
  m.def("coupling_at_offset", &physics::coupling_at_offset, py::arg("params"),
        py::arg("g_center"), py::arg("dy"));
  m.def("optimal_offset", &physics::optimal_offset, py::arg("params"), py::arg("g_center"),
        py::arg("delta_ca"));

  // markov
  m.def("generator", &markov::generator, py::arg("rates"));
  m.def("propagator", &markov::propagator, py::arg("gen"), py::arg("dt"));
  m.def("stationary", &markov::stationary, py::arg("gen"));

  // simulate
  py::class_<simulate::StateLabel>(m, "StateLabel")
      .def(py::init<>())
      .def_readwrite("alpha", &simulate::StateLabel::alpha)
      .def_readwrite("site", &simulate::StateLabel::site)
      .def("__repr__", [](const simulate::StateLabel& s) {
        return "StateLabel(alpha=" + std::to_string(s.alpha) +
               ", site=" + std::to_string(s.site) + ")";
      });
  py::class_<simulate::JumpProcessSpec>(m, "JumpProcessSpec")
      .def_readonly("states", &simulate::JumpProcessSpec::states)
      .def_readwrite("rates", &simulate::JumpProcessSpec::rates)
      .def_readwrite("flux", &simulate::JumpProcessSpec::flux)
      .def_readwrite("duration", &simulate::JumpProcessSpec::duration)
      .def_readwrite("initial", &simulate::JumpProcessSpec::initial)
      .def_readonly("warnings", &simulate::JumpProcessSpec::warnings)
      .def("validate", &simulate::JumpProcessSpec::validate);
  py::class_<simulate::JumpEvent>(m, "JumpEvent")
      .def_readonly("time", &simulate::JumpEvent::time)
      .def_readonly("state", &simulate::JumpEvent::state);
  py::class_<simulate::Trajectory>(m, "Trajectory")
      .def_readonly("states", &simulate::Trajectory::states)
      .def_readonly("initial_state", &simulate::Trajectory::initial_state)
      .def_readonly("duration", &simulate::Trajectory::duration)
      .def_readonly("events", &simulate::Trajectory::events)
      .def("state_at", &simulate::Trajectory::state_at, py::arg("t"));
  py::class_<simulate::ClickRecord>(m, "ClickRecord")
      .def_readonly("intervals", &simulate::ClickRecord::intervals)
      .def_readonly("duration", &simulate::ClickRecord::duration)
      .def("click_times", &simulate::ClickRecord::click_times);
  m.def("make_one_atom_spec", &simulate::make_one_atom_spec, py::arg("r10"), py::arg("r01"),
        py::arg("flux0"), py::arg("flux1"), py::arg("duration"));
  m.def("make_two_atom_spec", &simulate::make_two_atom_spec, py::arg("r10"), py::arg("r21"),
        py::arg("r_rep"), py::arg("flux0"), py::arg("flux1"), py::arg("flux2"),
        py::arg("duration"));
  m.def("split_state", &simulate::split_state, py::arg("spec"), py::arg("target_alpha"),
        py::arg("site_fluxes"), py::arg("hop_rate"));
  m.def("sample_trajectory", &simulate::sample_trajectory, py::arg("spec"), py::arg("seed"));
  m.def("emit_clicks", &simulate::emit_clicks, py::arg("trajectory"), py::arg("flux"),
        py::arg("seed"));

  // signal
  py::class_<signal::BinnedTrace>(m, "BinnedTrace")
      .def(py::init<>())
      .def_readwrite("bin_width", &signal::BinnedTrace::bin_width)
      .def_readwrite("start_time", &signal::BinnedTrace::start_time)
      .def_readwrite("counts", &signal::BinnedTrace::counts)
      .def("midpoint", &signal::BinnedTrace::midpoint, py::arg("i"));
  py::class_<signal::CountHistogram>(m, "CountHistogram")
      .def_readonly("bin_width", &signal::CountHistogram::bin_width)
      .def_readonly("probs", &signal::CountHistogram::probs)
      .def_readonly("total_bins", &signal::CountHistogram::total_bins)
      .def("prob", &signal::CountHistogram::prob, py::arg("n"))
      .def("max_count", &signal::CountHistogram::max_count);
  py::class_<signal::CorrelationCurve>(m, "CorrelationCurve")
      .def_readonly("lags", &signal::CorrelationCurve::lags)
      .def_readonly("values", &signal::CorrelationCurve::values);
  py::class_<signal::ExpFitResult>(m, "ExpFitResult")
      .def_readonly("amplitude", &signal::ExpFitResult::amplitude)
      .def_readonly("rate", &signal::ExpFitResult::rate)
      .def_readonly("offset", &signal::ExpFitResult::offset)
      .def_readonly("residual_norm", &signal::ExpFitResult::residual_norm)
      .def_readonly("iterations", &signal::ExpFitResult::iterations)
      .def_readonly("converged", &signal::ExpFitResult::converged)
      .def_readonly("degenerate", &signal::ExpFitResult::degenerate);
  m.def("bin_clicks", &signal::bin_clicks, py::arg("record"), py::arg("bin_width"));
  m.def("histogram", py::overload_cast<const signal::BinnedTrace&>(&signal::histogram),
        py::arg("trace"));
  m.def("histogram",
        py::overload_cast<const std::vector<signal::BinnedTrace>&>(&signal::histogram),
        py::arg("traces"));
  m.def("poisson_histogram", &signal::poisson_histogram, py::arg("mean"), py::arg("bin_width"));
  m.def("g2", py::overload_cast<const signal::BinnedTrace&, double>(&signal::g2),
        py::arg("trace"), py::arg("max_lag"));
  m.def("g2", py::overload_cast<const std::vector<signal::BinnedTrace>&, double>(&signal::g2),
        py::arg("traces"), py::arg("max_lag"));
  m.def("fit_exponential_decay",
        py::overload_cast<const std::vector<double>&, const std::vector<double>&>(
            &signal::fit_exponential_decay),
        py::arg("t"), py::arg("y"));
  m.def("fit_exponential_decay",
        py::overload_cast<const signal::CorrelationCurve&>(&signal::fit_exponential_decay),
        py::arg("curve"));
  m.def("ensemble_average", &signal::ensemble_average, py::arg("traces"));

  // filter
  py::enum_<filter::PredictMode>(m, "PredictMode")
      .value("exact", filter::PredictMode::exact)
      .value("linear", filter::PredictMode::linear);
  py::class_<filter::EmissionModel>(m, "EmissionModel")
      .def_static("poisson", &filter::EmissionModel::poisson, py::arg("mean_counts"),
                  py::arg("bin_width"))
      .def_static("empirical", &filter::EmissionModel::empirical, py::arg("hist"))
      .def_readonly("bin_width", &filter::EmissionModel::bin_width)
      .def_readonly("mean", &filter::EmissionModel::mean)
      .def("prob", &filter::EmissionModel::prob, py::arg("n"))
      .def("log_prob", &filter::EmissionModel::log_prob, py::arg("n"));
  py::class_<filter::FilterConfig>(m, "FilterConfig")
      .def(py::init<>())
      .def_readwrite("rates", &filter::FilterConfig::rates)
      .def_readwrite("emissions", &filter::FilterConfig::emissions)
      .def_readwrite("initial", &filter::FilterConfig::initial)
      .def_readwrite("predict_mode", &filter::FilterConfig::predict_mode);
  py::class_<filter::ProbabilityTrace>(m, "ProbabilityTrace")
      .def_readonly("times", &filter::ProbabilityTrace::times)
      .def_readonly("probs", &filter::ProbabilityTrace::probs)
      .def("n_bins", &filter::ProbabilityTrace::n_bins)
      .def("n_states", &filter::ProbabilityTrace::n_states);
  py::class_<filter::FilterResult>(m, "FilterResult")
      .def_readonly("trace", &filter::FilterResult::trace)
      .def_readonly("log_predictive", &filter::FilterResult::log_predictive)
      .def_readonly("flagged_bins", &filter::FilterResult::flagged_bins);
  py::class_<filter::EntropyResult>(m, "EntropyResult")
      .def_readonly("series", &filter::EntropyResult::series)
      .def_readonly("mean", &filter::EntropyResult::mean);
  m.def("run_filter", &filter::run_filter, py::arg("trace"), py::arg("config"));
  m.def("entropy_trace", &filter::entropy_trace, py::arg("probability_trace"));
  m.def("threshold_classify", &filter::threshold_classify, py::arg("trace"),
        py::arg("thresholds"));

  // estimate
  py::class_<estimate::MixtureFit>(m, "MixtureFit")
      .def_readonly("weights", &estimate::MixtureFit::weights)
      .def_readonly("residual", &estimate::MixtureFit::residual)
      .def_readonly("identifiable", &estimate::MixtureFit::identifiable);
  py::enum_<estimate::RateSet::Kind>(m, "RateSetKind")
      .value("one_atom", estimate::RateSet::Kind::one_atom)
      .value("two_atom", estimate::RateSet::Kind::two_atom);
  py::class_<estimate::RateSet>(m, "RateSet")
      .def(py::init<>())
      .def_readwrite("kind", &estimate::RateSet::kind)
      .def_readwrite("r10", &estimate::RateSet::r10)
      .def_readwrite("r01", &estimate::RateSet::r01)
      .def_readwrite("r21", &estimate::RateSet::r21)
      .def_readwrite("r_rep", &estimate::RateSet::r_rep)
      .def("rate_matrix", &estimate::RateSet::rate_matrix)
      .def("n_states", &estimate::RateSet::n_states);
  py::class_<estimate::ThreeStateCurves>(m, "ThreeStateCurves")
      .def_readonly("times", &estimate::ThreeStateCurves::times)
      .def_readonly("probs", &estimate::ThreeStateCurves::probs)
      .def_readonly("series_fallback", &estimate::ThreeStateCurves::series_fallback);
  py::class_<estimate::RateFitIteration>(m, "RateFitIteration")
      .def_readonly("rates", &estimate::RateFitIteration::rates)
      .def_readonly("residual", &estimate::RateFitIteration::residual)
      .def_readonly("rel_change", &estimate::RateFitIteration::rel_change);
  py::class_<estimate::RateFitResult>(m, "RateFitResult")
      .def_readonly("rates", &estimate::RateFitResult::rates)
      .def_readonly("history", &estimate::RateFitResult::history)
      .def_readonly("iterations", &estimate::RateFitResult::iterations)
      .def_readonly("converged", &estimate::RateFitResult::converged)
      .def_readonly("oscillating", &estimate::RateFitResult::oscillating);
  m.def("fit_mixture", &estimate::fit_mixture, py::arg("observed"), py::arg("components"));
  m.def("fit_mixture_ml", &estimate::fit_mixture_ml, py::arg("observed"),
        py::arg("components"));
  m.def("decompose_rates", &estimate::decompose_rates, py::arg("total"), py::arg("weights"));
  m.def("solve_three_state", &estimate::solve_three_state, py::arg("rates"),
        py::arg("initial"), py::arg("times"));
  m.def("iterative_rate_fit", &estimate::iterative_rate_fit, py::arg("traces"),
        py::arg("emissions"), py::arg("initial_guess"), py::arg("tol") = 1e-3,
        py::arg("max_iter") = 50);
  m.def("predicted_r21", &estimate::predicted_r21, py::arg("r10"), py::arg("t1"),
        py::arg("t2"));
  m.def("initial_guess_two_atom", &estimate::initial_guess_two_atom,
        py::arg("no_repumper_traces"), py::arg("t1"), py::arg("t2"));

  // hmm
  py::class_<hmm::PoissonHmm>(m, "PoissonHmm")
      .def(py::init<>())
      .def_readwrite("trans", &hmm::PoissonHmm::trans)
      .def_readwrite("means", &hmm::PoissonHmm::means)
      .def_readwrite("initial", &hmm::PoissonHmm::initial)
      .def_readwrite("bin_width", &hmm::PoissonHmm::bin_width)
      .def("n_states", &hmm::PoissonHmm::n_states)
      .def("validate", &hmm::PoissonHmm::validate);
  py::class_<hmm::HmmFitResult>(m, "HmmFitResult")
      .def_readonly("model", &hmm::HmmFitResult::model)
      .def_readonly("log_likelihood", &hmm::HmmFitResult::log_likelihood)
      .def_readonly("iterations", &hmm::HmmFitResult::iterations)
      .def_readonly("converged", &hmm::HmmFitResult::converged)
      .def_readonly("ll_history", &hmm::HmmFitResult::ll_history)
      .def_readonly("starved_states", &hmm::HmmFitResult::starved_states);
  py::enum_<hmm::Criterion>(m, "Criterion")
      .value("aic", hmm::Criterion::aic)
      .value("bic", hmm::Criterion::bic);
  py::class_<hmm::OrderScore>(m, "OrderScore")
      .def_readonly("n_states", &hmm::OrderScore::n_states)
      .def_readonly("log_likelihood", &hmm::OrderScore::log_likelihood)
      .def_readonly("n_params", &hmm::OrderScore::n_params)
      .def_readonly("score", &hmm::OrderScore::score)
      .def_readonly("fit", &hmm::OrderScore::fit);
  py::class_<hmm::GeneratorEstimate>(m, "GeneratorEstimate")
      .def_readonly("rates", &hmm::GeneratorEstimate::rates)
      .def_readonly("valid", &hmm::GeneratorEstimate::valid);
  m.def("hmm_log_likelihood", &hmm::log_likelihood, py::arg("model"), py::arg("trace"));
  m.def("posterior_marginals", &hmm::posterior_marginals, py::arg("model"), py::arg("trace"));
  m.def("em_fit",
        py::overload_cast<const std::vector<signal::BinnedTrace>&, const hmm::PoissonHmm&,
                          double, int>(&hmm::em_fit),
        py::arg("traces"), py::arg("init"), py::arg("tol") = 1e-6, py::arg("max_iter") = 500);
  m.def("em_fit",
        py::overload_cast<const std::vector<signal::BinnedTrace>&, int, std::uint64_t, int,
                          double, int>(&hmm::em_fit),
        py::arg("traces"), py::arg("n_states"), py::arg("seed"), py::arg("restarts") = 5,
        py::arg("tol") = 1e-6, py::arg("max_iter") = 500);
  m.def("compare_orders", &hmm::compare_orders, py::arg("traces"), py::arg("orders"),
        py::arg("criterion"), py::arg("seed"), py::arg("restarts") = 5,
        py::arg("tol") = 1e-6, py::arg("max_iter") = 500);
  m.def("rates_from_transitions", &hmm::rates_from_transitions, py::arg("model"));
  m.def("hmm_sample", &hmm::sample, py::arg("model"), py::arg("n_bins"), py::arg("seed"));

  // io
  m.def("save_clicks", &io::save_clicks, py::arg("record"), py::arg("path"));
  m.def("load_clicks", &io::load_clicks, py::arg("path"));
  m.def("save_hmm", &io::save_hmm, py::arg("model"), py::arg("path"));
  m.def("load_hmm", &io::load_hmm, py::arg("path"));

  // cli
  m.def(
      "cli_run", [](const std::vector<std::string>& args) { return cli::run(args); },
      py::arg("args"));
}
