#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "rplids/types.hpp"

namespace rplids {

// RBF kernel K(a,b) = exp(-gamma * ||a-b||^2).
struct KernelParams {
    double gamma = 0.9;
};

struct OcsvmTrainConfig {
    double nu = 0.2;
    double gamma = 0.9;
    double tolerance = 1e-4;  // max KKT violation, in units of the decision function
    int max_passes = 500;     // iteration cap = max_passes * n pair updates
    std::size_t cache_mb = 256;
};

// Per-feature min/max scaling to [0,1]; values outside the fitted range are
// clamped and constant features map to 0.
class MinMaxScaler {
public:
    MinMaxScaler() = default;
    MinMaxScaler(std::vector<double> lo, std::vector<double> hi);

    static MinMaxScaler fit(std::span<const double> rows, std::size_t dims);

    std::size_t dims() const { return lo_.size(); }
    void transform(std::span<const double> x, std::span<double> out) const;
    const std::vector<double>& lo() const { return lo_; }
    const std::vector<double>& hi() const { return hi_; }

private:
    std::vector<double> lo_;
    std::vector<double> hi_;
};

struct OcsvmFitReport {
    bool converged = false;
    double final_violation = 0.0;
    std::uint64_t iterations = 0;
};

// nu-one-class SVM. The dual coefficients satisfy 0 <= alpha_i <= 1/(nu*n)
// and sum(alpha) = 1; only alpha_i > 0 are retained.
class OcsvmModel {
public:
    OcsvmModel() = default;

    // `rows` is n*dims row-major raw (unscaled) data, assumed all normal.
    // Throws ValidationError (n < 2, bad nu/gamma, non-finite data) or
    // DegenerateDataError (all points identical).
    static OcsvmModel fit(std::span<const double> rows, std::size_t dims, const OcsvmTrainConfig& cfg,
                          OcsvmFitReport* report = nullptr);
    static OcsvmModel fit(std::span<const FeatureVector> data, const OcsvmTrainConfig& cfg,
                          OcsvmFitReport* report = nullptr);

    // sum_i alpha_i K(sv_i, scale(x)) - rho. Throws ValidationError on arity mismatch.
    double decision_value(std::span<const double> x) const;
    double decision_value(const FeatureVector& x) const { return decision_value(std::span<const double>(x)); }
    // +1 inlier, -1 outlier; a zero decision value counts as inlier.
    int predict(std::span<const double> x) const { return decision_value(x) >= 0.0 ? 1 : -1; }
    int predict(const FeatureVector& x) const { return predict(std::span<const double>(x)); }

    bool fitted() const { return !alphas_.empty(); }
    std::size_t dims() const { return scaler_.dims(); }
    std::size_t support_count() const { return alphas_.size(); }
    std::size_t training_size() const { return n_train_; }
    double rho() const { return rho_; }
    double nu() const { return nu_; }
    const KernelParams& kernel() const { return kernel_; }
    const std::vector<double>& alphas() const { return alphas_; }
    // Scaled support vector i.
    std::span<const double> support_vector(std::size_t i) const;
    const MinMaxScaler& scaler() const { return scaler_; }

    // Rebuilds a model from raw parts; used by deserialization and tests.
    static OcsvmModel from_parts(MinMaxScaler scaler, KernelParams kernel, double rho, double nu,
                                 std::vector<double> alphas, std::vector<double> scaled_svs,
                                 std::size_t n_train);

    // Versioned text dump; all reals in hexadecimal float notation so a
    // round trip is bit-exact.
    void save(std::ostream& out) const;
    static OcsvmModel load(std::istream& in);
    void save(const std::string& path) const;
    static OcsvmModel load(const std::string& path);

private:
    MinMaxScaler scaler_;
    KernelParams kernel_;
    double rho_ = 0.0;
    double nu_ = 0.0;
    std::vector<double> alphas_;
    std::vector<double> svs_;  // support_count * dims, scaled
    std::size_t n_train_ = 0;
};

}  // namespace rplids
