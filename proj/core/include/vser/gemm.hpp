#pragma once

namespace vser::detail {

// Row-major GEMM: C[m x n] = alpha * op(A)[m x k] * op(B)[k x n] + beta * C.
// op transposes the physically stored matrix when the flag is set.
template <class S>
void gemm(bool trans_a, bool trans_b, int m, int n, int k, S alpha,
          const S* a, const S* b, S beta, S* c);

void set_gemm_threads(int n);

}  // namespace vser::detail
