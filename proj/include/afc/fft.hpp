// fft.hpp - FFT and discrete Hilbert transform used by the propagation code
//
// Sign convention used throughout the library:
//   field(t)    = integral spectrum(nu) exp(-2*pi*i*nu*t) d nu
//   spectrum(nu)= integral field(t)    exp(+2*pi*i*nu*t) d t
// With this pairing a causal filter is analytic in the upper half nu-plane
// and its phase is the Hilbert transform (kernel 1/(pi*(nu - nu'))) of the
// log-magnitude.
#pragma once

#include <complex>
#include <vector>

namespace afc {

// Unnormalized DFT, in place.  sign = -1 applies exp(-2*pi*i*j*k/N) (use for
// spectrum -> time), sign = +1 applies exp(+2*pi*i*j*k/N) (time -> spectrum).
void fft_in_place(std::vector<std::complex<double>>& a, int sign);

// Periodic discrete Hilbert transform with kernel 1/(pi*(x - x')); maps
// cos -> sin.  Input samples are treated as one period of a uniform grid.
std::vector<double> hilbert_transform(const std::vector<double>& u);

}  // namespace afc
