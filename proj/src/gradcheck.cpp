#include "gatgan/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "gatgan/errors.hpp"

namespace gatgan {

double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double eps) {
    if (eps < 1e-5 || eps > 1e-2) {
        throw ContractError("grad_check eps must lie in [1e-5, 1e-2]");
    }

    std::vector<double> analytic(x.size());
    {
        Tape tape;
        Tensor probe(x.shape(), std::vector<double>(x.values().begin(), x.values().end()));
        probe.set_requires_grad(true);
        Tensor y = f(probe);
        if (y.size() != 1) throw ContractError("grad_check requires a scalar-valued function");
        tape.backward(y);
        if (!probe.has_grad()) {
            // f ignored its input; the analytic gradient is identically zero.
            std::fill(analytic.begin(), analytic.end(), 0.0);
        } else {
            auto g = probe.grad();
            std::copy(g.begin(), g.end(), analytic.begin());
        }
    }

    auto eval_at = [&](const std::vector<double>& vals) {
        Tensor probe(x.shape(), vals);
        return f(probe).item();
    };

    double worst = 0.0;
    std::vector<double> vals(x.values().begin(), x.values().end());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double keep = vals[i];
        vals[i] = keep + eps;
        const double up = eval_at(vals);
        vals[i] = keep - eps;
        const double down = eval_at(vals);
        vals[i] = keep;
        const double fd = (up - down) / (2.0 * eps);
        const double err = std::abs(analytic[i] - fd) /
                           std::max({1.0, std::abs(analytic[i]), std::abs(fd)});
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace gatgan
