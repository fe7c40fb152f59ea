#pragma once

namespace hcm {

// Standard normal density, CDF and upper tail. The tail form avoids the
// cancellation of 1 - cdf(x) for large x.
double norm_pdf(double x);
double norm_cdf(double x);
double norm_sf(double x);

// Inverse CDF (Wichura's AS 241, about 1e-16 relative accuracy).
// p must lie in (0, 1); the endpoints map to -inf / +inf.
double norm_quantile(double p);

}  // namespace hcm
