#pragma once

namespace comboplat {

// Standard normal CDF. Saturates to 0/1 for large |x|; accepts +-infinity.
double std_normal_cdf(double x);

// Upper tail 1 - Phi(x), computed without cancellation.
double std_normal_sf(double x);

double std_normal_pdf(double x);

// Inverse CDF (Wichura's AS241). Throws DomainError unless 0 < p < 1.
double std_normal_quantile(double p);

// Two-sided p-value threshold 2[1 - Phi(c)] matching a critical value c.
double two_sided_p(double critical_value);

}  // namespace comboplat
