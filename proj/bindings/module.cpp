#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "bnmtf/data_io.hpp"
#include "bnmtf/experiments.hpp"
#include "bnmtf/infer_gibbs_icm.hpp"
#include "bnmtf/infer_np.hpp"
#include "bnmtf/infer_vb.hpp"

namespace py = pybind11;
using namespace bnmtf;

namespace {

Engine engine_from_name(const std::string& name) {
    if (name == "np") return Engine::np;
    if (name == "gibbs") return Engine::gibbs;
    if (name == "icm") return Engine::icm;
    if (name == "vb") return Engine::vb;
    throw std::invalid_argument("unknown engine: " + name);
}

InitStrategy init_from_name(const std::string& name) {
    if (name == "prior_mean") return InitStrategy::prior_mean;
    if (name == "random_draw") return InitStrategy::random_draw;
    if (name == "kmeans") return InitStrategy::kmeans;
    throw std::invalid_argument("unknown init strategy: " + name);
}

py::dict trace_to_dict(const TraceRecord& trace) {
    py::dict d;
    d["train_mse"] = trace.train_mse;
    d["seconds"] = trace.seconds;
    if (!trace.elbo.empty()) d["elbo"] = trace.elbo;
    return d;
}

py::dict fit(const MaskedMatrix& data, const std::string& model,
             const std::string& engine, int k, int l, bool ard, double lam,
             double alpha_tau, double beta_tau, double alpha0, double beta0,
             std::uint64_t seed, int iterations, int burn_in, int thin,
             const std::string& init, int threads) {
    HyperParams hyper;
    hyper.lambda = lam;
    hyper.alpha_tau = alpha_tau;
    hyper.beta_tau = beta_tau;
    hyper.alpha0 = alpha0;
    hyper.beta0 = beta0;
    hyper.K = k;
    hyper.ard = ard;
    const Engine e = engine_from_name(engine);
    RunOptions opts = default_engine_options(e);
    if (iterations >= 0) opts.stop.max_iterations = iterations;
    if (burn_in >= 0) opts.burn_in = burn_in;
    opts.thin = thin;
    opts.init = init_from_name(init);
    opts.threads = threads;

    py::dict out;
    if (model == "nmf") {
        hyper.L = 0;
        switch (e) {
            case Engine::np: {
                auto r = run_np_nmf(data, hyper, opts, seed);
                out["U"] = r.state.U;
                out["V"] = r.state.V;
                out["prediction"] = r.state.predict();
                out["trace"] = trace_to_dict(r.trace);
                break;
            }
            case Engine::gibbs: {
                auto r = gibbs_run_nmf(data, hyper, opts, seed);
                out["U"] = r.posterior.summary_mean.U;
                out["V"] = r.posterior.summary_mean.V;
                out["tau"] = r.posterior.summary_mean.tau;
                out["retained_draws"] = static_cast<int>(r.posterior.draws.size());
                out["prediction"] = r.posterior.summary_mean.predict();
                out["trace"] = trace_to_dict(r.trace);
                break;
            }
            case Engine::icm: {
                auto r = icm_run_nmf(data, hyper, opts, seed);
                out["U"] = r.state.U;
                out["V"] = r.state.V;
                out["tau"] = r.state.tau;
                out["prediction"] = r.state.predict();
                out["trace"] = trace_to_dict(r.trace);
                break;
            }
            case Engine::vb: {
                auto r = vb_run_nmf(data, hyper, opts, seed);
                out["U"] = r.state.U.mean;
                out["V"] = r.state.V.mean;
                out["prediction"] = r.state.predict();
                out["trace"] = trace_to_dict(r.trace);
                break;
            }
        }
    } else if (model == "nmtf") {
        hyper.L = l > 0 ? l : k;
        switch (e) {
            case Engine::np: {
                auto r = run_np_nmtf(data, hyper, opts, seed);
                out["F"] = r.state.F;
                out["S"] = r.state.S;
                out["G"] = r.state.G;
                out["prediction"] = r.state.predict();
                out["trace"] = trace_to_dict(r.trace);
                break;
            }
            case Engine::gibbs: {
                auto r = gibbs_run_nmtf(data, hyper, opts, seed);
                out["F"] = r.posterior.summary_mean.F;
                out["S"] = r.posterior.summary_mean.S;
                out["G"] = r.posterior.summary_mean.G;
                out["tau"] = r.posterior.summary_mean.tau;
                out["retained_draws"] = static_cast<int>(r.posterior.draws.size());
                out["prediction"] = r.posterior.summary_mean.predict();
                out["trace"] = trace_to_dict(r.trace);
                break;
            }
            case Engine::icm: {
                auto r = icm_run_nmtf(data, hyper, opts, seed);
                out["F"] = r.state.F;
                out["S"] = r.state.S;
                out["G"] = r.state.G;
                out["tau"] = r.state.tau;
                out["prediction"] = r.state.predict();
                out["trace"] = trace_to_dict(r.trace);
                break;
            }
            case Engine::vb: {
                auto r = vb_run_nmtf(data, hyper, opts, seed);
                out["F"] = r.state.F.mean;
                out["S"] = r.state.S.mean;
                out["G"] = r.state.G.mean;
                out["prediction"] = r.state.predict();
                out["trace"] = trace_to_dict(r.trace);
                break;
            }
        }
    } else {
        throw std::invalid_argument("model must be 'nmf' or 'nmtf'");
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_bnmtf, m) {
    m.doc() = "Bayesian nonnegative matrix factorisation and tri-factorisation";

    py::class_<MaskedMatrix>(m, "MaskedMatrix")
        .def_static(
            "from_dense",
            [](const Eigen::MatrixXd& values,
               const py::array_t<bool, py::array::forcecast>& mask) {
                if (mask.ndim() != 2)
                    throw std::invalid_argument("mask must be a 2-d boolean array");
                BoolMatrix m(mask.shape(0), mask.shape(1));
                const auto view = mask.unchecked<2>();
                for (py::ssize_t i = 0; i < mask.shape(0); ++i)
                    for (py::ssize_t j = 0; j < mask.shape(1); ++j)
                        m(i, j) = view(i, j);
                return MaskedMatrix::from_dense(values, std::move(m));
            },
            py::arg("values"), py::arg("mask"))
        .def_property_readonly("values", &MaskedMatrix::values)
        .def_property_readonly("n_observed", &MaskedMatrix::n_observed)
        .def_property_readonly("observed_fraction", &MaskedMatrix::observed_fraction)
        .def("mse", &MaskedMatrix::mse, py::arg("prediction"))
        .def("i_divergence", &MaskedMatrix::i_divergence, py::arg("prediction"));

    py::class_<SeededRng>(m, "SeededRng")
        .def(py::init<std::uint64_t, std::uint64_t>(), py::arg("seed"),
             py::arg("stream") = 0)
        .def("uniform", &SeededRng::uniform)
        .def("normal", &SeededRng::normal);

    m.def(
        "tn_moments",
        [](double mu, double tau) {
            const Moments mm = tn_moments({mu, tau});
            return py::make_tuple(mm.mean, mm.variance);
        },
        py::arg("mu"), py::arg("tau"),
        "Mean and variance of the normal truncated to x >= 0");
    m.def(
        "sample_truncated_normal",
        [](double mu, double tau, SeededRng& rng) {
            return sample_truncated_normal({mu, tau}, rng);
        },
        py::arg("mu"), py::arg("tau"), py::arg("rng"));
    m.def(
        "sample_gamma",
        [](double shape, double rate, SeededRng& rng) {
            return sample_gamma({shape, rate}, rng);
        },
        py::arg("shape"), py::arg("rate"), py::arg("rng"));
    m.def("sample_exponential", &sample_exponential, py::arg("rate"), py::arg("rng"));
    m.def("digamma", &digamma, py::arg("x"));

    m.def(
        "generate_synthetic",
        [](int i, int j, int k, int l, double factor_rate, double noise,
           const std::string& noise_mode, std::uint64_t seed) {
            SyntheticSpec spec;
            spec.I = i;
            spec.J = j;
            spec.K = k;
            spec.L = l;
            spec.factor_rate = factor_rate;
            spec.noise = noise;
            spec.mode = noise_mode == "nsr" ? SyntheticSpec::NoiseMode::nsr
                                            : SyntheticSpec::NoiseMode::variance;
            SeededRng rng(seed, make_stream(stream_slot::data_gen, 0));
            Synthetic s = generate_synthetic(spec, rng);
            return py::make_tuple(s.data, s.truth, s.noise_variance);
        },
        py::arg("i"), py::arg("j"), py::arg("k"), py::arg("l") = 0,
        py::arg("factor_rate") = 1.0, py::arg("noise") = 1.0,
        py::arg("noise_mode") = "variance", py::arg("seed") = 0);

    m.def(
        "split_train_test",
        [](const MaskedMatrix& data, double test_fraction, std::uint64_t seed) {
            SeededRng rng(seed, make_stream(stream_slot::data_gen, 1));
            auto [train, test] = split_train_test(data, test_fraction, rng);
            return py::make_tuple(train, test);
        },
        py::arg("data"), py::arg("test_fraction"), py::arg("seed") = 0);

    m.def("fit", &fit, py::arg("data"), py::arg("model"), py::arg("engine"),
          py::arg("k"), py::arg("l") = 0, py::arg("ard") = false,
          py::arg("lam") = 0.1, py::arg("alpha_tau") = 1.0, py::arg("beta_tau") = 1.0,
          py::arg("alpha0") = 1.0, py::arg("beta0") = 1.0, py::arg("seed") = 0,
          py::arg("iterations") = -1, py::arg("burn_in") = -1, py::arg("thin") = 2,
          py::arg("init") = "random_draw", py::arg("threads") = 1,
          "Run one inference engine and return factors, prediction and trace");
}
