#pragma once

#include <cstddef>
#include <vector>

namespace adalr {

// Flat parameter/gradient vector. All optimizer math runs in 64-bit floats;
// 32-bit is not enough headroom for finite-difference gradient checks.
using ParamVector = std::vector<double>;

double l2_norm(const ParamVector& v);
double dot(const ParamVector& a, const ParamVector& b);

// y[i] += a * x[i], one multiply and one add per entry.
void axpy(double a, const ParamVector& x, ParamVector& y);

// out[i] = a[i] - b[i]
ParamVector sub(const ParamVector& a, const ParamVector& b);

void scale(ParamVector& v, double a);

bool all_finite(const ParamVector& v);

}  // namespace adalr
