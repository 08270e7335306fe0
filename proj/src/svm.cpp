// Kernel SVM trained on the dual by sequential minimal optimization with
// second-order working set selection (Fan, Chen & Lin 2005).

#include <algorithm>
#include <cmath>
#include <limits>
#include <list>
#include <unordered_map>

#include "hed/classifiers.hpp"

namespace hed::detail {

namespace {

constexpr double kTau = 1e-12;
constexpr double kTolerance = 1e-3;
constexpr std::size_t kCacheBytes = std::size_t{256} << 20;

double kernel_value(Kernel kernel, double gamma, int degree, double dot, double sq_dist) {
    switch (kernel) {
    case Kernel::Linear: return dot;
    case Kernel::Polynomial: return std::pow(gamma * dot, degree);
    case Kernel::Rbf: return std::exp(-gamma * sq_dist);
    }
    return 0.0;
}

/// Gram rows computed on demand, least-recently-used rows evicted.
class KernelCache {
public:
    KernelCache(const Eigen::Ref<const Eigen::MatrixXd>& X, Kernel kernel, double gamma, int degree)
        : X_(X), kernel_(kernel), gamma_(gamma), degree_(degree), sq_norm_(X.rowwise().squaredNorm()) {
        const auto n = static_cast<std::size_t>(X.rows());
        capacity_ = std::max<std::size_t>(2, kCacheBytes / (sizeof(double) * std::max<std::size_t>(n, 1)));
        diag_.resize(X.rows());
        for (Eigen::Index i = 0; i < X.rows(); ++i) diag_[i] = kernel_value(kernel_, gamma_, degree_, sq_norm_[i], 0.0);
    }

    const Eigen::VectorXd& row(Eigen::Index i) {
        if (auto it = index_.find(i); it != index_.end()) {
            lru_.splice(lru_.begin(), lru_, it->second);
            return it->second->second;
        }
        if (index_.size() >= capacity_) {
            index_.erase(lru_.back().first);
            lru_.pop_back();
        }
        Eigen::VectorXd dots = X_ * X_.row(i).transpose();
        for (Eigen::Index j = 0; j < dots.size(); ++j) {
            const double sq = std::max(0.0, sq_norm_[i] + sq_norm_[j] - 2.0 * dots[j]);
            dots[j] = kernel_value(kernel_, gamma_, degree_, dots[j], sq);
        }
        lru_.emplace_front(i, std::move(dots));
        index_[i] = lru_.begin();
        return lru_.front().second;
    }

    double diag(Eigen::Index i) const { return diag_[i]; }

private:
    Eigen::Ref<const Eigen::MatrixXd> X_;
    Kernel kernel_;
    double gamma_;
    int degree_;
    Eigen::VectorXd sq_norm_;
    Eigen::VectorXd diag_;
    std::size_t capacity_;
    std::list<std::pair<Eigen::Index, Eigen::VectorXd>> lru_;
    std::unordered_map<Eigen::Index, std::list<std::pair<Eigen::Index, Eigen::VectorXd>>::iterator> index_;
};

SvmMachine solve_binary(KernelCache& cache, const Eigen::Ref<const Eigen::MatrixXd>& X, const std::vector<double>& y,
                        double C) {
    const Eigen::Index n = X.rows();
    std::vector<double> alpha(static_cast<std::size_t>(n), 0.0);
    std::vector<double> grad(static_cast<std::size_t>(n), -1.0);
    auto at_upper = [&](Eigen::Index t) { return alpha[t] >= C; };
    auto at_lower = [&](Eigen::Index t) { return alpha[t] <= 0.0; };

    const long max_iter = std::max<long>(10'000'000L, 100L * n);
    for (long iter = 0; iter < max_iter; ++iter) {
        double gmax = -std::numeric_limits<double>::infinity();
        Eigen::Index i = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            if (y[t] > 0) {
                if (!at_upper(t) && -grad[t] >= gmax) {
                    gmax = -grad[t];
                    i = t;
                }
            } else if (!at_lower(t) && grad[t] >= gmax) {
                gmax = grad[t];
                i = t;
            }
        }
        if (i < 0) break;

        const Eigen::VectorXd& ki = cache.row(i);
        double gmax2 = -std::numeric_limits<double>::infinity();
        double obj_min = std::numeric_limits<double>::infinity();
        Eigen::Index j = -1;
        for (Eigen::Index t = 0; t < n; ++t) {
            // Q(i,t) = y_i y_t K(i,t)
            const double qit = y[i] * y[t] * ki[t];
            if (y[t] > 0) {
                if (at_lower(t)) continue;
                const double diff = gmax + grad[t];
                gmax2 = std::max(gmax2, grad[t]);
                if (diff > 0) {
                    double quad = cache.diag(i) + cache.diag(t) - 2.0 * y[i] * qit;
                    if (quad <= 0) quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= obj_min) {
                        obj_min = obj;
                        j = t;
                    }
                }
            } else {
                if (at_upper(t)) continue;
                const double diff = gmax - grad[t];
                gmax2 = std::max(gmax2, -grad[t]);
                if (diff > 0) {
                    double quad = cache.diag(i) + cache.diag(t) + 2.0 * y[i] * qit;
                    if (quad <= 0) quad = kTau;
                    const double obj = -(diff * diff) / quad;
                    if (obj <= obj_min) {
                        obj_min = obj;
                        j = t;
                    }
                }
            }
        }
        if (gmax + gmax2 < kTolerance || j < 0) break;

        // copy: the cache may evict row i when row j is fetched
        const Eigen::VectorXd qi = ki;
        const Eigen::VectorXd& kj = cache.row(j);
        const double kij = qi[j];
        const double old_ai = alpha[i], old_aj = alpha[j];

        if (y[i] != y[j]) {
            double quad = cache.diag(i) + cache.diag(j) - 2.0 * kij;
            if (quad <= 0) quad = kTau;
            const double delta = (-grad[i] - grad[j]) / quad;
            const double diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if (diff > 0) {
                if (alpha[j] < 0) {
                    alpha[j] = 0;
                    alpha[i] = diff;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = -diff;
            }
            if (diff > 0) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = C - diff;
                }
            } else if (alpha[j] > C) {
                alpha[j] = C;
                alpha[i] = C + diff;
            }
        } else {
            double quad = cache.diag(i) + cache.diag(j) - 2.0 * kij;
            if (quad <= 0) quad = kTau;
            const double delta = (grad[i] - grad[j]) / quad;
            const double sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if (sum > C) {
                if (alpha[i] > C) {
                    alpha[i] = C;
                    alpha[j] = sum - C;
                }
            } else if (alpha[j] < 0) {
                alpha[j] = 0;
                alpha[i] = sum;
            }
            if (sum > C) {
                if (alpha[j] > C) {
                    alpha[j] = C;
                    alpha[i] = sum - C;
                }
            } else if (alpha[i] < 0) {
                alpha[i] = 0;
                alpha[j] = sum;
            }
        }

        const double dai = alpha[i] - old_ai, daj = alpha[j] - old_aj;
        for (Eigen::Index t = 0; t < n; ++t) grad[t] += y[t] * (y[i] * qi[t] * dai + y[j] * kj[t] * daj);
    }

    // bias from free vectors, or the midpoint of the feasible interval
    double ub = std::numeric_limits<double>::infinity(), lb = -std::numeric_limits<double>::infinity();
    double sum_free = 0.0;
    int n_free = 0;
    for (Eigen::Index t = 0; t < n; ++t) {
        const double yg = y[t] * grad[t];
        if (at_upper(t)) {
            if (y[t] < 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else if (at_lower(t)) {
            if (y[t] > 0) ub = std::min(ub, yg);
            else lb = std::max(lb, yg);
        } else {
            ++n_free;
            sum_free += yg;
        }
    }
    const double rho = n_free > 0 ? sum_free / n_free : (ub + lb) / 2.0;

    std::vector<Eigen::Index> sv;
    for (Eigen::Index t = 0; t < n; ++t)
        if (alpha[t] > 0.0) sv.push_back(t);
    SvmMachine m;
    m.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), X.cols());
    m.dual_coef.resize(static_cast<Eigen::Index>(sv.size()));
    for (std::size_t s = 0; s < sv.size(); ++s) {
        m.support_vectors.row(static_cast<Eigen::Index>(s)) = X.row(sv[s]);
        m.dual_coef[static_cast<Eigen::Index>(s)] = alpha[sv[s]] * y[sv[s]];
    }
    m.bias = -rho;
    return m;
}

} // namespace

SvmModel fit_svm(const SvmParams& params, const Eigen::Ref<const Eigen::MatrixXd>& X, std::span<const int> y,
                 int n_classes) {
    SvmModel model;
    model.params = params;
    model.gamma = params.gamma.value_or(1.0 / static_cast<double>(X.cols()));
    KernelCache cache(X, params.kernel, model.gamma, params.degree);

    auto machine_for = [&](int positive) {
        std::vector<double> signs(y.size());
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < y.size(); ++i) {
            signs[i] = y[i] == positive ? 1.0 : -1.0;
            (signs[i] > 0 ? has_pos : has_neg) = true;
        }
        if (!has_pos || !has_neg) {
            // class absent from this training set: constant margin towards the present side
            SvmMachine m;
            m.support_vectors.resize(0, X.cols());
            m.dual_coef.resize(0);
            m.bias = has_pos ? 1.0 : -1.0;
            return m;
        }
        return solve_binary(cache, X, signs, params.C);
    };

    if (n_classes == 2) {
        model.machines.push_back(machine_for(1));
    } else {
        for (int c = 0; c < n_classes; ++c) model.machines.push_back(machine_for(c));
    }
    return model;
}

Eigen::VectorXd svm_kernel_row(const SvmModel& model, const Eigen::Ref<const Eigen::MatrixXd>& rows,
                               const Eigen::Ref<const Eigen::VectorXd>& x) {
    Eigen::VectorXd k = rows * x;
    if (model.params.kernel == Kernel::Rbf) {
        const double xx = x.squaredNorm();
        const Eigen::VectorXd rr = rows.rowwise().squaredNorm();
        for (Eigen::Index j = 0; j < k.size(); ++j) k[j] = std::exp(-model.gamma * std::max(0.0, rr[j] + xx - 2.0 * k[j]));
    } else if (model.params.kernel == Kernel::Polynomial) {
        for (Eigen::Index j = 0; j < k.size(); ++j) k[j] = std::pow(model.gamma * k[j], model.params.degree);
    }
    return k;
}

Eigen::VectorXd svm_scores(const SvmModel& model, const Eigen::Ref<const Eigen::VectorXd>& x) {
    auto margin = [&](const SvmMachine& m) {
        if (m.dual_coef.size() == 0) return m.bias;
        return m.dual_coef.dot(svm_kernel_row(model, m.support_vectors, x)) + m.bias;
    };
    if (model.machines.size() == 1) {
        const double f = margin(model.machines.front());
        Eigen::VectorXd s(2);
        s << -f, f;
        return s;
    }
    Eigen::VectorXd s(static_cast<Eigen::Index>(model.machines.size()));
    for (std::size_t c = 0; c < model.machines.size(); ++c) s[static_cast<Eigen::Index>(c)] = margin(model.machines[c]);
    return s;
}

} // namespace hed::detail
