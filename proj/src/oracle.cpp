#include "monattn/oracle.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "monattn/attention.hpp"
#include "monattn/rng.hpp"

namespace monattn {

namespace {

void require_prob_matrix(const Mat& p) {
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        for (Eigen::Index j = 0; j < p.cols(); ++j) {
            if (!std::isfinite(p(i, j)) || p(i, j) < 0.0 || p(i, j) > 1.0) {
                throw std::domain_error("oracle: p(" + std::to_string(i) + "," +
                                        std::to_string(j) + ") is not a probability");
            }
        }
    }
}

// Walks every way output step i can extend a path that has survived with
// probability `mass` and last selection at 1-based position t_prev.
// Selection events are scored directly from running products of the scan;
// fall-off absorbs the path.
void enumerate_from(const Mat& p, int i, int t_prev, double mass, Mat& alpha) {
    const int U = static_cast<int>(p.rows());
    const int T = static_cast<int>(p.cols());
    if (i >= U || mass == 0.0) {
        return;
    }
    double survive = 1.0;  // probability the scan reaches entry j unselected
    for (int j = t_prev; j <= T; ++j) {
        const double select_here = mass * survive * p(i, j - 1);
        alpha(i, j - 1) += select_here;
        enumerate_from(p, i + 1, j, select_here, alpha);
        survive *= 1.0 - p(i, j - 1);
    }
}

}  // namespace

Mat enumerate_alpha_exact(const Mat& p) {
    if (p.rows() < 1 || p.cols() < 1) {
        throw std::domain_error("enumerate_alpha_exact: empty probability matrix");
    }
    if (p.cols() > kOracleMaxMemory || p.rows() > kOracleMaxOutputs) {
        throw std::domain_error(
            "enumerate_alpha_exact: matrix exceeds enumeration limits (T <= " +
            std::to_string(kOracleMaxMemory) + ", U <= " +
            std::to_string(kOracleMaxOutputs) + ")");
    }
    require_prob_matrix(p);
    Mat alpha = Mat::Zero(p.rows(), p.cols());
    enumerate_from(p, 0, 1, 1.0, alpha);
    return alpha;
}

Mat monte_carlo_alpha(const Mat& p, int n_samples, std::uint64_t seed,
                      HardSemantics semantics) {
    if (p.rows() < 1 || p.cols() < 1) {
        throw std::domain_error("monte_carlo_alpha: empty probability matrix");
    }
    if (n_samples < 1) {
        throw std::domain_error("monte_carlo_alpha: need at least one sample");
    }
    require_prob_matrix(p);
    const int U = static_cast<int>(p.rows());
    const int T = static_cast<int>(p.cols());
    Mat counts = Mat::Zero(U, T);
    for (int k = 0; k < n_samples; ++k) {
        SeededRng rng(seed, static_cast<std::uint64_t>(k));
        int t_prev = 1;
        for (int i = 0; i < U; ++i) {
            auto p_at = [&](int j) { return p(i, j - 1); };
            const HardScanOutcome out =
                hard_scan(p_at, t_prev, T, 0.5, SelectionMode::kSample, &rng);
            if (out.selected) {
                counts(i, *out.selected - 1) += 1.0;
                t_prev = *out.selected;
            } else if (semantics == HardSemantics::kAbsorbing) {
                break;  // process over; later rows get nothing from this sample
            }
            // kRescanning: emit nothing for this output, scan again from t_prev.
        }
    }
    return counts / static_cast<double>(n_samples);
}

double residual_mass(const Vec& alpha_row) {
    return 1.0 - alpha_row.sum();
}

}  // namespace monattn
