#pragma once

// Likelihood evaluation on measurement datasets, maximum-likelihood state
// reconstruction, Metropolis sampling of density matrices under the
// likelihood, and mean/std estimation of state functionals over the
// resulting ensembles.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "entropic.hpp"
#include "measurement.hpp"
#include "qstate.hpp"
#include "rng.hpp"

namespace qcycle {

// ---------------------------------------------------------------------------
// Likelihood model
// ---------------------------------------------------------------------------

namespace detail {

// Real coordinates of a Hermitian matrix in an orthonormal operator basis:
// diagonal entries, then sqrt(2) * (re, im) of each upper off-diagonal.
// Tr(A B) = coords(A) . coords(B) for Hermitian A, B.
inline Eigen::VectorXd hermitian_coordinates(const MatrixXcd& h) {
    const Eigen::Index d = h.rows();
    Eigen::VectorXd v(d * d);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < d; ++i) v(k++) = h(i, i).real();
    const double r2 = std::sqrt(2.0);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = i + 1; j < d; ++j) {
            v(k++) = r2 * h(i, j).real();
            v(k++) = r2 * h(i, j).imag();
        }
    return v;
}

}  // namespace detail

class LikelihoodModel {
  public:
    LikelihoodModel(Dataset dataset, std::vector<EffectSet> sets)
        : dataset_(std::move(dataset)), sets_(std::move(sets)) {
        if (sets_.empty()) throw std::invalid_argument("LikelihoodModel: no effect sets");
        layout_ = sets_[0].layout;
        for (const auto& s : sets_)
            if (!(s.layout == layout_))
                throw std::invalid_argument("LikelihoodModel: effect sets disagree on layout");

        std::size_t rows = 0;
        for (const auto& s : sets_) rows += s.effects.size();
        effects_.reserve(rows);
        std::vector<std::size_t> base(sets_.size());
        for (std::size_t s = 0; s < sets_.size(); ++s) {
            base[s] = effects_.size();
            for (const auto& e : sets_[s].effects) effects_.push_back(e);
        }

        counts_ = Eigen::VectorXd::Zero(Eigen::Index(rows));
        for (const auto& rec : dataset_.records) {
            std::size_t s = 0;
            for (; s < sets_.size(); ++s)
                if (sets_[s].id == rec.effect_set_id) break;
            if (s == sets_.size())
                throw std::invalid_argument("LikelihoodModel: count references unknown effect set '" +
                                            rec.effect_set_id + "'");
            if (rec.outcome_index < 0 ||
                std::size_t(rec.outcome_index) >= sets_[s].effects.size())
                throw std::invalid_argument("LikelihoodModel: outcome index out of range");
            if (rec.count < 0) throw std::invalid_argument("LikelihoodModel: negative count");
            counts_(Eigen::Index(base[s] + std::size_t(rec.outcome_index))) +=
                double(rec.count);
        }
        total_ = counts_.sum();

        const Eigen::Index d2 = layout_.total_dim() * layout_.total_dim();
        stacked_.resize(Eigen::Index(rows), d2);
        for (std::size_t r = 0; r < rows; ++r)
            stacked_.row(Eigen::Index(r)) = detail::hermitian_coordinates(effects_[r]);
        for (Eigen::Index r = 0; r < counts_.size(); ++r)
            if (counts_(r) > 0) observed_.push_back(r);
    }

    const SpaceLayout& layout() const { return layout_; }
    const std::vector<EffectSet>& effect_sets() const { return sets_; }
    const std::vector<MatrixXcd>& effects() const { return effects_; }
    const Eigen::VectorXd& counts() const { return counts_; }
    double total_counts() const { return total_; }
    const Dataset& dataset() const { return dataset_; }

    // Outcome probabilities of every effect row for the given matrix.
    Eigen::VectorXd probabilities(const MatrixXcd& rho) const {
        return stacked_ * detail::hermitian_coordinates(rho);
    }

    // Sum over observed outcomes of count * ln Tr(rho E); -inf if any observed
    // outcome has probability <= 0.
    double log_likelihood_matrix(const MatrixXcd& rho) const {
        const Eigen::VectorXd p = probabilities(rho);
        double ll = 0.0;
        for (Eigen::Index r : observed_) {
            if (p(r) <= 0.0) return -std::numeric_limits<double>::infinity();
            ll += counts_(r) * std::log(p(r));
        }
        return ll;
    }

  private:
    Dataset dataset_;
    std::vector<EffectSet> sets_;
    SpaceLayout layout_;
    std::vector<MatrixXcd> effects_;
    Eigen::VectorXd counts_;
    double total_ = 0.0;
    Eigen::MatrixXd stacked_;           // row r = coordinates of effect r
    std::vector<Eigen::Index> observed_;  // rows with positive count
};

inline double log_likelihood(const DensityOperator& rho, const LikelihoodModel& model) {
    if (!(rho.layout == model.layout()))
        throw std::invalid_argument("log_likelihood: state layout does not match model");
    return model.log_likelihood_matrix(rho.matrix);
}

// ---------------------------------------------------------------------------
// Maximum-likelihood reconstruction (diluted R-rho-R fixed point)
// ---------------------------------------------------------------------------

struct MleOptions {
    int max_iters = 5000;
    double tol = 1e-10;      // stop when the log-likelihood gain drops below this
    double dilution = 0.5;   // lambda in rho <- N[(1 - lambda) rho + lambda R rho R]
};

struct MleResult {
    DensityOperator state;
    double log_likelihood = 0.0;
    int iterations = 0;
    bool converged = false;
    std::vector<double> ll_history;  // log-likelihood after each accepted iteration
};

inline MleResult mle_reconstruct(const LikelihoodModel& model, const MleOptions& options = {}) {
    if (options.max_iters < 1 || options.dilution <= 0.0 || options.dilution > 1.0 ||
        options.tol < 0.0)
        throw std::invalid_argument("mle_reconstruct: invalid options");
    const Eigen::Index d = model.layout().total_dim();
    const double n_total = model.total_counts();

    MatrixXcd rho = MatrixXcd::Identity(d, d) / double(d);
    double ll = model.log_likelihood_matrix(rho);
    MleResult out;
    out.ll_history.push_back(ll);

    if (n_total <= 0.0) {  // nothing observed: the flat initializer is already maximal
        out.state = DensityOperator::make(model.layout(), rho);
        out.log_likelihood = ll;
        out.converged = true;
        return out;
    }

    const auto& effects = model.effects();
    const Eigen::VectorXd& counts = model.counts();
    for (int it = 0; it < options.max_iters; ++it) {
        const Eigen::VectorXd p = model.probabilities(rho);
        MatrixXcd r_op = MatrixXcd::Zero(d, d);
        for (Eigen::Index i = 0; i < counts.size(); ++i) {
            if (counts(i) <= 0.0) continue;
            const double denom = std::max(p(i), 1e-300);
            r_op += (counts(i) / (n_total * denom)) * effects[i];
        }

        const MatrixXcd rrr = r_op * rho * r_op;
        double lambda = options.dilution;
        MatrixXcd next;
        double ll_next = -std::numeric_limits<double>::infinity();
        bool improved = false;
        for (int back = 0; back < 40; ++back) {
            MatrixXcd cand = (1.0 - lambda) * rho + lambda * rrr;
            cand = MatrixXcd(0.5 * (cand + cand.adjoint()));
            cand /= cand.trace().real();
            const double cand_ll = model.log_likelihood_matrix(cand);
            if (cand_ll >= ll - 1e-12 * std::abs(ll)) {
                next = std::move(cand);
                ll_next = cand_ll;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!improved) break;  // no admissible step left; treat as converged-as-is

        const double gain = ll_next - ll;
        rho = std::move(next);
        ll = ll_next;
        out.ll_history.push_back(ll);
        out.iterations = it + 1;
        if (gain >= 0.0 && gain < options.tol) {
            out.converged = true;
            break;
        }
    }
    if (!out.converged && out.iterations < options.max_iters &&
        out.ll_history.size() >= 2)
        out.converged = true;  // exited via the no-admissible-step branch

    out.state = DensityOperator::make(model.layout(), rho);
    out.log_likelihood = ll;
    return out;
}

inline DensityOperator mle_estimate(const LikelihoodModel& model, const MleOptions& options = {}) {
    return mle_reconstruct(model, options).state;
}

// ---------------------------------------------------------------------------
// Metropolis sampling
// ---------------------------------------------------------------------------

struct ProposalParams {
    double sigma = 0.1;          // std of the Gaussian entries of the Hermitian step
    double accept_low = 0.4;     // adaptation window for the running acceptance rate
    double accept_high = 0.6;
    int adapt_interval = 100;    // steps between adaptation decisions during burn-in
    double adapt_factor = 1.1;   // sigma multiplier/divisor per adaptation decision
};

struct MetropolisOptions {
    int n = 100;                  // retained samples
    long long thinning = 100000;  // steps between retained samples
    long long burn_in = 100000;   // steps before the first retained sample
    std::uint64_t seed = 0;
    std::optional<DensityOperator> initial;  // default: maximally mixed
    ProposalParams proposal;
};

struct PosteriorEnsemble {
    std::vector<DensityOperator> samples;
    long long thinning = 0;
    long long burn_in = 0;
    std::uint64_t seed = 0;
    std::vector<double> acceptance;  // acceptance rate over each retention window
    double final_sigma = 0.0;        // proposal width after burn-in adaptation
};

namespace detail {

// Symmetric Hermitian step: real diagonal N(0, sigma); each off-diagonal
// complex entry with re and im N(0, sigma/sqrt(2)). The map eps -> -eps has
// the same law, which is what makes the walk reversible.
inline MatrixXcd hermitian_step(Eigen::Index d, double sigma, Rng& rng) {
    MatrixXcd eps(d, d);
    const double off = sigma / std::sqrt(2.0);
    for (Eigen::Index i = 0; i < d; ++i) {
        eps(i, i) = sigma * rng.gaussian();
        for (Eigen::Index j = i + 1; j < d; ++j) {
            const cplx z(off * rng.gaussian(), off * rng.gaussian());
            eps(i, j) = z;
            eps(j, i) = std::conj(z);
        }
    }
    return eps;
}

inline bool is_psd(const MatrixXcd& m) {
    // Cholesky succeeds only for (numerically) positive definite matrices;
    // fall back to the exact spectrum on failure to keep the boundary honest.
    Eigen::LLT<MatrixXcd> llt(m);
    if (llt.info() == Eigen::Success) return true;
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= 0.0;
}

}  // namespace detail

inline PosteriorEnsemble metropolis_sample(const LikelihoodModel& model,
                                           const MetropolisOptions& options = {}) {
    if (options.n < 1 || options.thinning < 1 || options.burn_in < 0)
        throw std::invalid_argument("metropolis_sample: invalid chain options");
    const ProposalParams& pp = options.proposal;
    if (!(pp.sigma > 0.0) || !(pp.accept_low > 0.0) || !(pp.accept_high < 1.0) ||
        !(pp.accept_low < pp.accept_high) || pp.adapt_interval < 1 || pp.adapt_factor <= 1.0)
        throw std::invalid_argument("metropolis_sample: invalid proposal params");

    const Eigen::Index d = model.layout().total_dim();
    MatrixXcd rho;
    if (options.initial) {
        if (!(options.initial->layout == model.layout()))
            throw std::invalid_argument("metropolis_sample: initial state layout mismatch");
        rho = options.initial->matrix;
    } else {
        rho = MatrixXcd::Identity(d, d) / double(d);
    }
    double ll = model.log_likelihood_matrix(rho);
    if (std::isinf(ll))
        throw std::invalid_argument("metropolis_sample: initial state has zero likelihood");

    Rng rng(options.seed);
    double sigma = pp.sigma;
    const MatrixXcd eye = MatrixXcd::Identity(d, d);

    long long window_accepted = 0, window_steps = 0;
    auto step = [&](bool adapting) {
        MatrixXcd eps = detail::hermitian_step(d, sigma, rng);
        const cplx tr = eps.trace();
        MatrixXcd cand = rho + eps - (tr / double(d)) * eye;
        ++window_steps;
        if (detail::is_psd(cand)) {
            const double cand_ll = model.log_likelihood_matrix(cand);
            const double delta = cand_ll - ll;
            bool accept = delta >= 0.0;
            if (!accept) {
                const double u = rng.uniform();
                accept = (u > 0.0) && (std::log(u) < delta);
            }
            if (accept) {
                rho = std::move(cand);
                ll = cand_ll;
                ++window_accepted;
            }
        }
        if (adapting && window_steps % pp.adapt_interval == 0) {
            const double rate = double(window_accepted) / double(window_steps);
            if (rate > pp.accept_high)
                sigma *= pp.adapt_factor;
            else if (rate < pp.accept_low)
                sigma /= pp.adapt_factor;
            sigma = std::clamp(sigma, 1e-8, 10.0);
            window_accepted = 0;
            window_steps = 0;
        }
    };

    for (long long k = 0; k < options.burn_in; ++k) step(true);

    PosteriorEnsemble out;
    out.thinning = options.thinning;
    out.burn_in = options.burn_in;
    out.seed = options.seed;
    out.final_sigma = sigma;
    out.samples.reserve(std::size_t(options.n));
    for (int s = 0; s < options.n; ++s) {
        window_accepted = 0;
        window_steps = 0;
        for (long long k = 0; k < options.thinning; ++k) step(false);
        out.acceptance.push_back(double(window_accepted) / double(window_steps));
        out.samples.push_back(DensityOperator::make(model.layout(), rho));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Functional estimation over ensembles
// ---------------------------------------------------------------------------

struct FunctionalEstimate {
    double f_est = 0.0;
    double delta = 0.0;  // population standard deviation over finite evaluations
    int n_used = 0;
    double diverged_fraction = 0.0;
};

using StateFunctional = std::function<EntropyValue(const DensityOperator&)>;
using TwoStateFunctional =
    std::function<EntropyValue(const DensityOperator&, const DensityOperator&)>;

namespace detail {

inline FunctionalEstimate summarize(const std::vector<EntropyValue>& values) {
    FunctionalEstimate out;
    double sum = 0.0, sum2 = 0.0;
    for (const auto& v : values) {
        if (v.diverged) continue;
        sum += v.value;
        sum2 += v.value * v.value;
        ++out.n_used;
    }
    const std::size_t n = values.size();
    out.diverged_fraction = n == 0 ? 0.0 : double(n - std::size_t(out.n_used)) / double(n);
    if (out.n_used == 0) {
        out.f_est = std::numeric_limits<double>::infinity();
        return out;
    }
    out.f_est = sum / out.n_used;
    const double var = std::max(0.0, sum2 / out.n_used - out.f_est * out.f_est);
    out.delta = std::sqrt(var);
    return out;
}

}  // namespace detail

inline FunctionalEstimate estimate_functional(const StateFunctional& f,
                                              const PosteriorEnsemble& ensemble) {
    if (ensemble.samples.empty())
        throw std::invalid_argument("estimate_functional: empty ensemble");
    std::vector<EntropyValue> values;
    values.reserve(ensemble.samples.size());
    for (const auto& s : ensemble.samples) values.push_back(f(s));
    return detail::summarize(values);
}

// Two-state functionals pair equal-index samples from two independent chains.
inline FunctionalEstimate estimate_functional(const TwoStateFunctional& f,
                                              const PosteriorEnsemble& first,
                                              const PosteriorEnsemble& second) {
    if (first.samples.empty() || second.samples.empty())
        throw std::invalid_argument("estimate_functional: empty ensemble");
    if (first.samples.size() != second.samples.size())
        throw std::invalid_argument("estimate_functional: ensembles must have equal size");
    std::vector<EntropyValue> values;
    values.reserve(first.samples.size());
    for (std::size_t k = 0; k < first.samples.size(); ++k)
        values.push_back(f(first.samples[k], second.samples[k]));
    return detail::summarize(values);
}

inline DensityOperator mean_state(const PosteriorEnsemble& ensemble) {
    if (ensemble.samples.empty()) throw std::invalid_argument("mean_state: empty ensemble");
    MatrixXcd acc = ensemble.samples[0].matrix;
    for (std::size_t k = 1; k < ensemble.samples.size(); ++k)
        acc += ensemble.samples[k].matrix;
    acc /= double(ensemble.samples.size());
    return DensityOperator::make(ensemble.samples[0].layout, acc);
}

// ---------------------------------------------------------------------------
// Ensemble persistence
// ---------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const PosteriorEnsemble& e) {
    j = nlohmann::json{{"thinning", e.thinning}, {"burn_in", e.burn_in},
                       {"seed", e.seed},         {"acceptance", e.acceptance},
                       {"final_sigma", e.final_sigma}};
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : e.samples) samples.push_back(s);
    j["samples"] = std::move(samples);
}

inline void from_json(const nlohmann::json& j, PosteriorEnsemble& e) {
    e.thinning = j.at("thinning").get<long long>();
    e.burn_in = j.at("burn_in").get<long long>();
    e.seed = j.at("seed").get<std::uint64_t>();
    e.acceptance = j.at("acceptance").get<std::vector<double>>();
    e.final_sigma = j.at("final_sigma").get<double>();
    e.samples.clear();
    for (const auto& item : j.at("samples")) e.samples.push_back(item.get<DensityOperator>());
    if (e.samples.empty())
        throw std::invalid_argument("PosteriorEnsemble: no samples in file");
}

inline void write_ensemble(const PosteriorEnsemble& e, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_ensemble: cannot open " + path);
    nlohmann::json j = e;
    out << j.dump() << '\n';
}

inline PosteriorEnsemble read_ensemble(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_ensemble: cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j.get<PosteriorEnsemble>();
}

}  // namespace qcycle
