#include "rplids/ocsvm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <list>
#include <sstream>

#include "rplids/csv.hpp"
#include "rplids/error.hpp"

namespace rplids {

MinMaxScaler::MinMaxScaler(std::vector<double> lo, std::vector<double> hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
    if (lo_.size() != hi_.size()) throw ValidationError("scaler bounds differ in arity");
}

MinMaxScaler MinMaxScaler::fit(std::span<const double> rows, std::size_t dims) {
    if (dims == 0 || rows.size() % dims != 0 || rows.empty()) throw ValidationError("scaler fit needs n*dims values");
    std::vector<double> lo(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(dims));
    std::vector<double> hi = lo;
    for (std::size_t r = dims; r < rows.size(); r += dims) {
        for (std::size_t d = 0; d < dims; ++d) {
            lo[d] = std::min(lo[d], rows[r + d]);
            hi[d] = std::max(hi[d], rows[r + d]);
        }
    }
    return MinMaxScaler(std::move(lo), std::move(hi));
}

void MinMaxScaler::transform(std::span<const double> x, std::span<double> out) const {
    for (std::size_t d = 0; d < lo_.size(); ++d) {
        const double span = hi_[d] - lo_[d];
        double v = span > 0.0 ? (x[d] - lo_[d]) / span : 0.0;
        out[d] = std::clamp(v, 0.0, 1.0);
    }
}

namespace {

double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double t = a[d] - b[d];
        s += t * t;
    }
    return std::exp(-gamma * s);
}

// Kernel rows computed on demand and kept in an LRU cache.
class KernelCache {
public:
    KernelCache(const std::vector<double>& x, std::size_t n, std::size_t dims, double gamma, std::size_t budget_bytes)
        : x_(x), n_(n), dims_(dims), gamma_(gamma), slot_(n, lru_.end()), rows_(n) {
        const std::size_t row_bytes = n * sizeof(double);
        capacity_ = std::max<std::size_t>(2, budget_bytes / std::max<std::size_t>(row_bytes, 1));
    }

    const std::vector<double>& row(std::size_t i) {
        if (slot_[i] != lru_.end()) {
            lru_.splice(lru_.begin(), lru_, slot_[i]);
            return rows_[i];
        }
        if (lru_.size() >= capacity_) {
            const std::size_t victim = lru_.back();
            lru_.pop_back();
            slot_[victim] = lru_.end();
            std::vector<double>().swap(rows_[victim]);
        }
        auto& r = rows_[i];
        r.resize(n_);
        const std::span<const double> xi(x_.data() + i * dims_, dims_);
        for (std::size_t j = 0; j < n_; ++j) r[j] = rbf(xi, std::span<const double>(x_.data() + j * dims_, dims_), gamma_);
        lru_.push_front(i);
        slot_[i] = lru_.begin();
        return r;
    }

private:
    const std::vector<double>& x_;
    std::size_t n_, dims_;
    double gamma_;
    std::size_t capacity_;
    std::list<std::size_t> lru_;
    std::vector<std::list<std::size_t>::iterator> slot_;
    std::vector<std::vector<double>> rows_;
};

}  // namespace

OcsvmModel OcsvmModel::fit(std::span<const FeatureVector> data, const OcsvmTrainConfig& cfg, OcsvmFitReport* report) {
    std::vector<double> flat;
    flat.reserve(data.size() * kFeatureCount);
    for (const auto& v : data) flat.insert(flat.end(), v.begin(), v.end());
    return fit(flat, kFeatureCount, cfg, report);
}

OcsvmModel OcsvmModel::fit(std::span<const double> rows, std::size_t dims, const OcsvmTrainConfig& cfg,
                           OcsvmFitReport* report) {
    if (!(cfg.nu > 0.0 && cfg.nu <= 1.0)) throw ValidationError("nu must be in (0,1]");
    if (!(cfg.gamma > 0.0) || !std::isfinite(cfg.gamma)) throw ValidationError("gamma must be finite and positive");
    if (dims == 0 || rows.size() % dims != 0) throw ValidationError("training data must be n*dims values");
    const std::size_t n = rows.size() / dims;
    if (n < 2) throw ValidationError("one-class SVM needs at least 2 training points");
    for (double v : rows)
        if (!std::isfinite(v)) throw ValidationError("training data contains non-finite values");

    bool all_same = true;
    for (std::size_t r = 1; r < n && all_same; ++r)
        all_same = std::equal(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(dims),
                              rows.begin() + static_cast<std::ptrdiff_t>(r * dims));
    if (all_same) throw DegenerateDataError("all training points are identical");

    MinMaxScaler scaler = MinMaxScaler::fit(rows, dims);
    std::vector<double> x(n * dims);
    for (std::size_t r = 0; r < n; ++r)
        scaler.transform(rows.subspan(r * dims, dims), std::span<double>(x.data() + r * dims, dims));

    // Solved in the scaled dual: 0 <= a_i <= 1, sum(a) = nu*n. The reported
    // model divides by nu*n to recover the unit-sum form.
    const double total = cfg.nu * static_cast<double>(n);
    std::vector<double> a(n, 0.0);
    {
        const auto full = static_cast<std::size_t>(std::floor(total));
        for (std::size_t i = 0; i < std::min(full, n); ++i) a[i] = 1.0;
        if (full < n) a[full] = total - static_cast<double>(full);
    }

    KernelCache cache(x, n, dims, cfg.gamma, cfg.cache_mb * 1024 * 1024);
    std::vector<double> grad(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (a[i] == 0.0) continue;
        const auto& qi = cache.row(i);
        for (std::size_t k = 0; k < n; ++k) grad[k] += a[i] * qi[k];
    }

    constexpr double kTau = 1e-12;
    const double eps = cfg.tolerance * total;
    const std::uint64_t max_iter = static_cast<std::uint64_t>(std::max(cfg.max_passes, 1)) * n;
    OcsvmFitReport rep;
    double violation = std::numeric_limits<double>::infinity();

    for (rep.iterations = 0; rep.iterations < max_iter; ++rep.iterations) {
        // First index: steepest feasible ascent among variables that can grow.
        double gmax = -std::numeric_limits<double>::infinity();
        std::size_t i = n;
        for (std::size_t t = 0; t < n; ++t)
            if (a[t] < 1.0 && -grad[t] >= gmax) {
                gmax = -grad[t];
                i = t;
            }
        if (i == n) break;
        const auto& qi = cache.row(i);

        // Second index: best second-order gain among variables that can shrink.
        double gmax2 = -std::numeric_limits<double>::infinity();
        double best = std::numeric_limits<double>::infinity();
        std::size_t j = n;
        for (std::size_t t = 0; t < n; ++t) {
            if (a[t] <= 0.0) continue;
            gmax2 = std::max(gmax2, grad[t]);
            const double diff = gmax + grad[t];
            if (diff > 0.0) {
                double quad = 2.0 - 2.0 * qi[t];
                if (quad <= 0.0) quad = kTau;
                const double obj = -(diff * diff) / quad;
                if (obj <= best) {
                    best = obj;
                    j = t;
                }
            }
        }
        violation = gmax + gmax2;
        if (violation < eps || j == n) {
            rep.converged = true;
            break;
        }

        double quad = 2.0 - 2.0 * qi[j];
        if (quad <= 0.0) quad = kTau;
        const double old_i = a[i], old_j = a[j];
        const double delta = (grad[i] - grad[j]) / quad;
        const double sum = old_i + old_j;
        double ai = old_i - delta;
        double aj = old_j + delta;
        if (sum > 1.0) {
            if (ai > 1.0) {
                ai = 1.0;
                aj = sum - 1.0;
            }
        } else if (aj < 0.0) {
            aj = 0.0;
            ai = sum;
        }
        if (sum > 1.0) {
            if (aj > 1.0) {
                aj = 1.0;
                ai = sum - 1.0;
            }
        } else if (ai < 0.0) {
            ai = 0.0;
            aj = sum;
        }
        a[i] = ai;
        a[j] = aj;
        const double di = ai - old_i, dj = aj - old_j;
        // qi may have been evicted by fetching qj; refetch both through the cache.
        const auto& ri = cache.row(i);
        for (std::size_t k = 0; k < n; ++k) grad[k] += di * ri[k];
        const auto& rj = cache.row(j);
        for (std::size_t k = 0; k < n; ++k) grad[k] += dj * rj[k];
    }
    rep.final_violation = violation / total;

    // Offset: mean gradient over free variables, else midpoint of the bounds.
    double ub = std::numeric_limits<double>::infinity();
    double lb = -std::numeric_limits<double>::infinity();
    double free_sum = 0.0;
    std::size_t free_n = 0;
    for (std::size_t k = 0; k < n; ++k) {
        if (a[k] >= 1.0)
            lb = std::max(lb, grad[k]);
        else if (a[k] <= 0.0)
            ub = std::min(ub, grad[k]);
        else {
            free_sum += grad[k];
            ++free_n;
        }
    }
    const double rho_scaled = free_n ? free_sum / static_cast<double>(free_n) : (ub + lb) / 2.0;

    std::vector<double> alphas;
    std::vector<double> svs;
    for (std::size_t k = 0; k < n; ++k) {
        if (a[k] <= 0.0) continue;
        alphas.push_back(a[k] / total);
        svs.insert(svs.end(), x.begin() + static_cast<std::ptrdiff_t>(k * dims),
                   x.begin() + static_cast<std::ptrdiff_t>((k + 1) * dims));
    }
    if (report) *report = rep;
    return from_parts(std::move(scaler), KernelParams{cfg.gamma}, rho_scaled / total, cfg.nu, std::move(alphas),
                      std::move(svs), n);
}

OcsvmModel OcsvmModel::from_parts(MinMaxScaler scaler, KernelParams kernel, double rho, double nu,
                                  std::vector<double> alphas, std::vector<double> scaled_svs, std::size_t n_train) {
    if (scaler.dims() == 0 || scaled_svs.size() != alphas.size() * scaler.dims())
        throw ValidationError("support vectors do not match scaler arity");
    OcsvmModel m;
    m.scaler_ = std::move(scaler);
    m.kernel_ = kernel;
    m.rho_ = rho;
    m.nu_ = nu;
    m.alphas_ = std::move(alphas);
    m.svs_ = std::move(scaled_svs);
    m.n_train_ = n_train;
    return m;
}

std::span<const double> OcsvmModel::support_vector(std::size_t i) const {
    return std::span<const double>(svs_.data() + i * dims(), dims());
}

double OcsvmModel::decision_value(std::span<const double> x) const {
    if (!fitted()) throw StateError("one-class SVM is not fitted");
    if (x.size() != dims())
        throw ValidationError("arity mismatch: model has " + std::to_string(dims()) + " features, got " +
                              std::to_string(x.size()));
    std::vector<double> z(dims());
    scaler_.transform(x, z);
    double s = 0.0;
    for (std::size_t i = 0; i < alphas_.size(); ++i) s += alphas_[i] * rbf(support_vector(i), z, kernel_.gamma);
    return s - rho_;
}

// ---------------------------------------------------------------------------
// serialization

namespace {

constexpr const char* kMagic = "rplids-ocsvm";
constexpr int kVersion = 1;

std::string hex(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::hex);
    return std::string(buf, p);
}

double unhex(const std::string& s, std::size_t line) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::hex);
    if (ec != std::errc{} || p != s.data() + s.size()) throw ParseError("bad hex float '" + s + "'", line);
    return v;
}

std::vector<double> read_reals(std::istream& in, std::size_t count, std::size_t& line, const char* what) {
    std::string text;
    if (!std::getline(in, text)) throw ParseError(std::string("missing ") + what, line + 1);
    ++line;
    std::istringstream ss(text);
    std::string tok;
    ss >> tok;
    if (tok != what) throw ParseError(std::string("expected ") + what, line);
    std::vector<double> out;
    while (ss >> tok) out.push_back(unhex(tok, line));
    if (out.size() != count) throw ParseError(std::string("wrong value count for ") + what, line);
    return out;
}

}  // namespace

void OcsvmModel::save(std::ostream& out) const {
    if (!fitted()) throw StateError("cannot save an unfitted model");
    out << kMagic << ' ' << kVersion << '\n';
    out << "dims " << dims() << '\n';
    out << "n_train " << n_train_ << '\n';
    out << "support " << alphas_.size() << '\n';
    out << "gamma " << hex(kernel_.gamma) << '\n';
    out << "rho " << hex(rho_) << '\n';
    out << "nu " << hex(nu_) << '\n';
    out << "lo";
    for (double v : scaler_.lo()) out << ' ' << hex(v);
    out << "\nhi";
    for (double v : scaler_.hi()) out << ' ' << hex(v);
    out << '\n';
    for (std::size_t i = 0; i < alphas_.size(); ++i) {
        out << "sv " << hex(alphas_[i]);
        for (double v : support_vector(i)) out << ' ' << hex(v);
        out << '\n';
    }
}

OcsvmModel OcsvmModel::load(std::istream& in) {
    std::size_t line = 0;
    std::string text;
    auto next = [&](const char* key) {
        if (!std::getline(in, text)) throw ParseError(std::string("missing ") + key, line + 1);
        ++line;
        std::istringstream ss(text);
        std::string k, v;
        ss >> k >> v;
        if (k != key) throw ParseError(std::string("expected ") + key, line);
        return v;
    };
    if (next(kMagic) != std::to_string(kVersion)) throw ParseError("unsupported model version", line);
    const auto dims = static_cast<std::size_t>(csv::parse_int(next("dims"), line));
    const auto n_train = static_cast<std::size_t>(csv::parse_int(next("n_train"), line));
    const auto nsv = static_cast<std::size_t>(csv::parse_int(next("support"), line));
    const double gamma = unhex(next("gamma"), line);
    const double rho = unhex(next("rho"), line);
    const double nu = unhex(next("nu"), line);
    auto lo = read_reals(in, dims, line, "lo");
    auto hi = read_reals(in, dims, line, "hi");
    std::vector<double> alphas, svs;
    alphas.reserve(nsv);
    svs.reserve(nsv * dims);
    for (std::size_t i = 0; i < nsv; ++i) {
        auto row = read_reals(in, dims + 1, line, "sv");
        alphas.push_back(row[0]);
        svs.insert(svs.end(), row.begin() + 1, row.end());
    }
    return from_parts(MinMaxScaler(std::move(lo), std::move(hi)), KernelParams{gamma}, rho, nu, std::move(alphas),
                      std::move(svs), n_train);
}

void OcsvmModel::save(const std::string& path) const {
    auto out = csv::open_output(path);
    save(out);
    if (!out) throw IoError("failed writing '" + path + "'");
}

OcsvmModel OcsvmModel::load(const std::string& path) {
    auto in = csv::open_input(path);
    return load(in);
}

}  // namespace rplids
