#pragma once

// POVM effect families (error-mixed atomic projectors tensored with displaced
// photon-number projectors), Born-rule probabilities, seeded multinomial
// sampling, and the JSON-lines dataset format. Effect sets are reproducible
// from their settings and never serialized as matrices.

#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "qstate.hpp"
#include "rng.hpp"

namespace qcycle {

enum class AtomicBasis { z, x };

inline const char* to_string(AtomicBasis b) { return b == AtomicBasis::z ? "z" : "x"; }

inline AtomicBasis atomic_basis_from_string(const std::string& s) {
    if (s == "z") return AtomicBasis::z;
    if (s == "x") return AtomicBasis::x;
    throw std::invalid_argument("atomic_basis: expected 'z' or 'x', got '" + s + "'");
}

/// One tomography family: a single atomic basis read out with error epsilon,
/// combined with a displaced photon-number probe per listed amplitude.
struct EffectFamilySpec {
    AtomicBasis atomic_basis = AtomicBasis::z;
    double detection_error = 0.05;
    std::vector<cplx> displacement_amplitudes = {cplx(0.0, 0.0)};
    int photon_resolution = 4; // photon numbers n < resolution are resolved
    int cavity_dim = 4;
};

/// Everything needed to rebuild one effect set deterministically.
struct EffectSetting {
    AtomicBasis basis = AtomicBasis::z;
    cplx alpha{0.0, 0.0};
    double detection_error = 0.05;
    int photon_resolution = 4;
    int cavity_dim = 4;
};

struct EffectSet {
    std::string id;
    SpaceLayout layout;
    std::vector<MatrixXcd> effects;
    EffectSetting setting;
};

struct DatasetRecord {
    std::string effect_set_id;
    int outcome_index = 0;
    long long count = 0;
};

struct Dataset {
    std::vector<DatasetRecord> records;
    long long total_shots = 0;
};

// ---------------------------------------------------------------------------
// Displacement

inline MatrixXcd annihilation_operator(int dim) {
    if (dim < 2) throw std::invalid_argument("annihilation_operator: dim must be >= 2");
    MatrixXcd a = MatrixXcd::Zero(dim, dim);
    for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(double(n));
    return a;
}

/// exp(alpha a+ - alpha* a) of the truncated generator: exactly unitary on
/// the truncated space, and D(alpha)D(-alpha) = I exactly. The first column
/// deviates from the untruncated coherent amplitudes once |alpha| is large
/// relative to the cutoff (0.053 max deviation at alpha=1, dim=4).
inline MatrixXcd displacement_operator(cplx alpha, int dim) {
    if (dim < 2) throw std::invalid_argument("displacement_operator: dim must be >= 2");
    if (!std::isfinite(alpha.real()) || !std::isfinite(alpha.imag()))
        throw std::invalid_argument("displacement_operator: alpha must be finite");
    if (alpha == cplx(0.0, 0.0)) return MatrixXcd::Identity(dim, dim);
    MatrixXcd a = annihilation_operator(dim);
    MatrixXcd g = alpha * a.adjoint() - std::conj(alpha) * a; // anti-Hermitian
    EigResult eig = hermitian_eig(MatrixXcd(cplx(0.0, 1.0) * g));
    VectorXcd phases(dim);
    for (int i = 0; i < dim; ++i) phases(i) = std::exp(cplx(0.0, -eig.eigenvalues(i)));
    return eig.eigenvectors * phases.asDiagonal() * eig.eigenvectors.adjoint();
}

// ---------------------------------------------------------------------------
// Effect sets

namespace detail {

inline std::string format_alpha(cplx a) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g%+gi", a.real(), a.imag());
    return buf;
}

inline std::vector<MatrixXcd> atomic_readout(AtomicBasis basis, double eps) {
    MatrixXcd p0(2, 2), p1(2, 2);
    if (basis == AtomicBasis::z) {
        p0 << 1, 0, 0, 0;
        p1 << 0, 0, 0, 1;
    } else {
        p0 << 0.5, 0.5, 0.5, 0.5;
        p1 << 0.5, -0.5, -0.5, 0.5;
    }
    return {(1.0 - eps) * p0 + eps * p1, (1.0 - eps) * p1 + eps * p0};
}

} // namespace detail

inline void check_family(const EffectFamilySpec& spec) {
    if (!(spec.detection_error >= 0.0 && spec.detection_error <= 0.5))
        throw std::invalid_argument("EffectFamilySpec: detection_error must be in [0, 1/2]");
    if (spec.cavity_dim < 2) throw std::invalid_argument("EffectFamilySpec: cavity_dim >= 2");
    if (spec.photon_resolution < 1 || spec.photon_resolution > spec.cavity_dim)
        throw std::invalid_argument("EffectFamilySpec: photon_resolution in [1, cavity_dim]");
    for (cplx a : spec.displacement_amplitudes)
        if (!std::isfinite(a.real()) || !std::isfinite(a.imag()))
            throw std::invalid_argument("EffectFamilySpec: amplitudes must be finite");
    if (spec.displacement_amplitudes.empty())
        throw std::invalid_argument("EffectFamilySpec: need at least one amplitude");
}

/// One set per displacement amplitude. Outcome s*resolution + n is atomic
/// outcome s with n displaced photons; when the resolution does not exhaust
/// the space, one trailing complement effect absorbs the remainder so every
/// set sums to the identity exactly.
inline std::vector<EffectSet> build_effect_set(const EffectFamilySpec& spec) {
    check_family(spec);
    const int nc = spec.cavity_dim;
    SpaceLayout layout = atom_cavity_layout(nc);
    std::vector<MatrixXcd> atoms = detail::atomic_readout(spec.atomic_basis, spec.detection_error);

    std::vector<EffectSet> sets;
    sets.reserve(spec.displacement_amplitudes.size());
    for (cplx alpha : spec.displacement_amplitudes) {
        MatrixXcd d = displacement_operator(alpha, nc);
        EffectSet set;
        set.id = std::string(to_string(spec.atomic_basis)) + "_a" + detail::format_alpha(alpha);
        set.layout = layout;
        set.setting = {spec.atomic_basis, alpha, spec.detection_error, spec.photon_resolution,
                       nc};
        MatrixXcd resolved = MatrixXcd::Zero(nc, nc);
        std::vector<MatrixXcd> photon;
        for (int n = 0; n < spec.photon_resolution; ++n) {
            MatrixXcd pn = d.col(n) * d.col(n).adjoint();
            resolved += pn;
            photon.push_back(std::move(pn));
        }
        for (const auto& m : atoms)
            for (const auto& pn : photon) set.effects.push_back(kron(m, pn));
        if (spec.photon_resolution < nc) {
            MatrixXcd rest = MatrixXcd::Identity(nc, nc) - resolved;
            set.effects.push_back(kron(MatrixXcd::Identity(2, 2), rest));
        }
        sets.push_back(std::move(set));
    }
    return sets;
}

/// The default tomography collection: both atomic bases, amplitudes
/// {0, 0.7, 0.7i, -0.7}. Probes the full {I, sigma_x, sigma_z} x cavity
/// sector, which contains every state the protocols produce.
inline std::vector<EffectSet> build_ic_effect_sets(double detection_error = 0.05,
                                                   int photon_resolution = 4,
                                                   int cavity_dim = 4) {
    std::vector<EffectSet> all;
    for (AtomicBasis basis : {AtomicBasis::z, AtomicBasis::x}) {
        EffectFamilySpec spec;
        spec.atomic_basis = basis;
        spec.detection_error = detection_error;
        spec.displacement_amplitudes = {cplx(0.0, 0.0), cplx(0.7, 0.0), cplx(0.0, 0.7),
                                        cplx(-0.7, 0.0)};
        spec.photon_resolution = photon_resolution;
        spec.cavity_dim = cavity_dim;
        for (auto& s : build_effect_set(spec)) all.push_back(std::move(s));
    }
    return all;
}

// ---------------------------------------------------------------------------
// Born rule and sampling

inline VectorXd born_probabilities(const DensityOperator& rho, const EffectSet& set) {
    if (!(rho.layout == set.layout))
        throw std::invalid_argument("born_probabilities: layout mismatch");
    VectorXd p(Eigen::Index(set.effects.size()));
    for (std::size_t i = 0; i < set.effects.size(); ++i) {
        double v = (rho.matrix * set.effects[i]).trace().real();
        p(Eigen::Index(i)) = std::min(1.0, std::max(0.0, v));
    }
    return p;
}

/// Multinomial draws per effect set; the per-set stream is derived from
/// (seed, set index) so identical inputs give byte-identical datasets and
/// sets do not perturb each other.
inline Dataset sample_dataset(const DensityOperator& rho, const std::vector<EffectSet>& sets,
                              long long shots_per_set, std::uint64_t seed) {
    if (shots_per_set < 0) throw std::invalid_argument("sample_dataset: shots must be >= 0");
    Dataset out;
    for (std::size_t s = 0; s < sets.size(); ++s) {
        VectorXd p = born_probabilities(rho, sets[s]);
        std::vector<long long> counts(sets[s].effects.size(), 0);
        Rng rng(derive_seed(seed, s));
        for (long long shot = 0; shot < shots_per_set; ++shot) {
            double u = rng.uniform();
            double cum = 0.0;
            int pick = int(counts.size()) - 1;
            for (int k = 0; k < int(counts.size()); ++k) {
                cum += p(k);
                if (u < cum) {
                    pick = k;
                    break;
                }
            }
            ++counts[std::size_t(pick)];
        }
        for (int k = 0; k < int(counts.size()); ++k)
            out.records.push_back({sets[s].id, k, counts[std::size_t(k)]});
        out.total_shots += shots_per_set;
    }
    return out;
}

// ---------------------------------------------------------------------------
// JSON-lines dataset format: one object per effect set,
// {"id": ..., "spec": {...}, "counts": [...]}.

inline void to_json(nlohmann::json& j, const EffectSetting& s) {
    j = nlohmann::json{{"basis", to_string(s.basis)},
                       {"alpha", {s.alpha.real(), s.alpha.imag()}},
                       {"detection_error", s.detection_error},
                       {"photon_resolution", s.photon_resolution},
                       {"cavity_dim", s.cavity_dim}};
}

inline void from_json(const nlohmann::json& j, EffectSetting& s) {
    s.basis = atomic_basis_from_string(j.at("basis").get<std::string>());
    s.alpha = cplx(j.at("alpha").at(0).get<double>(), j.at("alpha").at(1).get<double>());
    j.at("detection_error").get_to(s.detection_error);
    j.at("photon_resolution").get_to(s.photon_resolution);
    j.at("cavity_dim").get_to(s.cavity_dim);
}

inline EffectSet rebuild_effect_set(const EffectSetting& setting) {
    EffectFamilySpec spec;
    spec.atomic_basis = setting.basis;
    spec.detection_error = setting.detection_error;
    spec.displacement_amplitudes = {setting.alpha};
    spec.photon_resolution = setting.photon_resolution;
    spec.cavity_dim = setting.cavity_dim;
    return build_effect_set(spec).front();
}

inline void write_dataset_jsonl(std::ostream& os, const Dataset& dataset,
                                const std::vector<EffectSet>& sets) {
    for (const auto& set : sets) {
        std::vector<long long> counts(set.effects.size(), 0);
        for (const auto& r : dataset.records)
            if (r.effect_set_id == set.id) {
                if (r.outcome_index < 0 || std::size_t(r.outcome_index) >= counts.size())
                    throw std::invalid_argument("write_dataset_jsonl: outcome out of range");
                counts[std::size_t(r.outcome_index)] += r.count;
            }
        nlohmann::json line{{"id", set.id}, {"spec", set.setting}, {"counts", counts}};
        os << line.dump() << "\n";
    }
}

inline void write_dataset_jsonl(const Dataset& dataset, const std::vector<EffectSet>& sets,
                                const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("write_dataset_jsonl: cannot write " + path);
    write_dataset_jsonl(os, dataset, sets);
    if (!os) throw std::runtime_error("write_dataset_jsonl: write failed for " + path);
}

struct LoadedDataset {
    Dataset dataset;
    std::vector<EffectSet> effect_sets;
};

inline LoadedDataset read_dataset_jsonl(std::istream& is) {
    LoadedDataset out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        EffectSet set = rebuild_effect_set(j.at("spec").get<EffectSetting>());
        if (j.at("id").get<std::string>() != set.id)
            throw std::invalid_argument("read_dataset_jsonl: id does not match spec");
        auto counts = j.at("counts").get<std::vector<long long>>();
        if (counts.size() != set.effects.size())
            throw std::invalid_argument("read_dataset_jsonl: counts length mismatch");
        for (int k = 0; k < int(counts.size()); ++k) {
            if (counts[std::size_t(k)] < 0)
                throw std::invalid_argument("read_dataset_jsonl: negative count");
            out.dataset.records.push_back({set.id, k, counts[std::size_t(k)]});
            out.dataset.total_shots += counts[std::size_t(k)];
        }
        out.effect_sets.push_back(std::move(set));
    }
    return out;
}

inline LoadedDataset read_dataset_jsonl(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("read_dataset_jsonl: cannot open " + path);
    return read_dataset_jsonl(is);
}

} // namespace qcycle
