#include "vser/gemm.hpp"

#include <Eigen/Core>

namespace vser::detail {

namespace {
template <class S>
using RowMat =
    Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Map = Eigen::Map<RowMat<S>>;
template <class S>
using CMap = Eigen::Map<const RowMat<S>>;
}  // namespace

template <class S>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, S alpha,
          const S* a, const S* b, S beta, S* c) {
    Map<S> cm(c, m, n);
    CMap<S> am(a, trans_a ? k : m, trans_a ? m : k);
    CMap<S> bm(b, trans_b ? n : k, trans_b ? k : n);

    auto assign = [&](const auto& prod) {
        if (beta == S(0)) {
            if (alpha == S(1))
                cm.noalias() = prod;
            else
                cm.noalias() = alpha * prod;
        } else {
            cm *= beta;
            if (alpha == S(1))
                cm.noalias() += prod;
            else
                cm.noalias() += alpha * prod;
        }
    };

    if (!trans_a && !trans_b)
        assign(am * bm);
    else if (trans_a && !trans_b)
        assign(am.transpose() * bm);
    else if (!trans_a && trans_b)
        assign(am * bm.transpose());
    else
        assign(am.transpose() * bm.transpose());
}

template void gemm<float>(bool, bool, int, int, int, float, const float*,
                          const float*, float, float*);
template void gemm<double>(bool, bool, int, int, int, double, const double*,
                           const double*, double, double*);

void set_gemm_threads(int n) {
    Eigen::setNbThreads(n > 0 ? n : 0);
}

}  // namespace vser::detail
