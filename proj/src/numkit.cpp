#include "monattn/numkit.hpp"

#include <cmath>
#include <stdexcept>

namespace monattn {

void require_finite(const Vec& v, const char* what) {
    if (!v.allFinite()) {
        throw std::domain_error(std::string(what) + ": non-finite entry");
    }
}

void require_finite(const Mat& m, const char* what) {
    if (!m.allFinite()) {
        throw std::domain_error(std::string(what) + ": non-finite entry");
    }
}

Vec softmax(const Vec& e) {
    if (e.size() == 0) {
        throw std::domain_error("softmax: empty input");
    }
    require_finite(e, "softmax");
    const double m = e.maxCoeff();
    Vec w = (e.array() - m).exp();
    return w / w.sum();
}

double sigmoid(double x) {
    if (!std::isfinite(x)) {
        throw std::domain_error("sigmoid: non-finite input");
    }
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double z = std::exp(x);
    return z / (1.0 + z);
}

Vec cumsum(const Vec& v) {
    Vec out(v.size());
    double acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        acc += v[i];
        out[i] = acc;
    }
    return out;
}

static void require_unit_interval(const Vec& v, const char* what) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
            throw std::domain_error(std::string(what) + ": entry outside [0, 1]");
        }
    }
}

Vec exclusive_cumprod(const Vec& v) {
    require_unit_interval(v, "exclusive_cumprod");
    Vec out(v.size());
    double acc = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out[i] = acc;
        acc *= v[i];
    }
    return out;
}

Vec exclusive_cumprod_stable(const Vec& v, double eps) {
    require_unit_interval(v, "exclusive_cumprod_stable");
    if (!(eps > 0.0 && eps < 1.0)) {
        throw std::domain_error("exclusive_cumprod_stable: eps outside (0, 1)");
    }
    Vec out(v.size());
    double log_acc = 0.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        out[i] = std::max(std::exp(log_acc), eps);
        log_acc += std::log(std::max(v[i], 1e-300));
    }
    return out;
}

}  // namespace monattn
