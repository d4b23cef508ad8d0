#include "afc/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <stdexcept>

namespace afc {

namespace {
// FFTW plan creation/destruction is not thread safe; execution is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

void fft_in_place(std::vector<std::complex<double>>& a, int sign) {
    if (a.empty())
        throw std::invalid_argument("fft: empty input");
    if (sign != 1 && sign != -1)
        throw std::invalid_argument("fft: sign must be +1 or -1");
    auto* data = reinterpret_cast<fftw_complex*>(a.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        plan = fftw_plan_dft_1d(static_cast<int>(a.size()), data, data,
                                sign == -1 ? FFTW_FORWARD : FFTW_BACKWARD,
                                FFTW_ESTIMATE);
    }
    if (!plan)
        throw std::runtime_error("fft: planner failed");
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
}

std::vector<double> hilbert_transform(const std::vector<double>& u) {
    const std::size_t n = u.size();
    if (n < 4)
        throw std::invalid_argument("fft: hilbert transform needs at least 4 samples");
    std::vector<std::complex<double>> w(n);
    for (std::size_t i = 0; i < n; ++i)
        w[i] = u[i];
    fft_in_place(w, -1);
    // Multiply by -i*sgn(s); DC and Nyquist carry no quadrature component.
    const std::complex<double> neg_i(0.0, -1.0), pos_i(0.0, 1.0);
    w[0] = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
        if (2 * j < n)
            w[j] *= neg_i;
        else if (2 * j == n)
            w[j] = 0.0;
        else
            w[j] *= pos_i;
    }
    fft_in_place(w, 1);
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i)
        v[i] = w[i].real() / static_cast<double>(n);
    return v;
}

}  // namespace afc
