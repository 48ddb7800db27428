#include "depest/signal_prep.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "depest/errors.hpp"

namespace depest::signal {

void Waveform::validate() const {
  if (sample_rate_hz <= 0) throw ConfigError("sample rate must be positive");
  if (samples.empty()) throw EmptyInputError("waveform has no samples");
}

void StftConfig::validate() const {
  if (window_len < 2) throw ConfigError("STFT window length must be at least 2");
  if (hop < 1) throw ConfigError("STFT hop must be at least 1");
  if (fft_len < window_len) throw ConfigError("FFT length must not be shorter than the window");
}

void MelConfig::validate(int sample_rate_hz) const {
  if (n_mels < 1) throw ConfigError("n_mels must be at least 1");
  if (f_min_hz < 0.0 || f_min_hz >= f_max_hz) throw ConfigError("mel band needs 0 <= f_min < f_max");
  if (f_max_hz > sample_rate_hz / 2.0) throw ConfigError("f_max exceeds the Nyquist frequency");
}

std::vector<double> hann_window(std::size_t length) {
  if (length < 2) throw ConfigError("Hann window length must be at least 2");
  std::vector<double> w(length);
  const double l = static_cast<double>(length);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / l));
  }
  return w;
}

std::size_t stft_frame_count(std::size_t n_samples, const StftConfig& cfg) {
  if (n_samples < cfg.window_len) return 0;
  return (n_samples - cfg.window_len) / cfg.hop + 1;
}

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

void fft_radix2(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  // Twiddles exp(-j 2 pi k / n) for k < n/2, each from a direct cos/sin call.
  thread_local std::vector<std::complex<double>> twiddles;
  if (twiddles.size() != n / 2) {
    twiddles.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      twiddles[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
    }
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t half = len / 2;
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < half; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + half] * twiddles[k * step];
        a[i + k] = u + v;
        a[i + k + half] = u - v;
      }
    }
  }
}

}  // namespace

void dft_inplace(std::vector<std::complex<double>>& data) {
  const std::size_t n = data.size();
  if (n <= 1) return;
  if (is_power_of_two(n)) {
    fft_radix2(data);
    return;
  }
  std::vector<std::complex<double>> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      acc += data[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>((j * k) % n) /
                                           static_cast<double>(n));
    }
    out[k] = acc;
  }
  data = std::move(out);
}

ComplexGrid stft(const Waveform& wave, const StftConfig& cfg) {
  wave.validate();
  cfg.validate();
  if (wave.samples.size() < cfg.window_len) {
    throw EmptyInputError("waveform of " + std::to_string(wave.samples.size()) +
                          " samples is shorter than one STFT window (" + std::to_string(cfg.window_len) + ")");
  }
  const auto window = hann_window(cfg.window_len);
  ComplexGrid grid;
  grid.frames = stft_frame_count(wave.samples.size(), cfg);
  grid.bins = cfg.bins();
  grid.values.resize(grid.frames * grid.bins);
  std::vector<std::complex<double>> buf(cfg.fft_len);
  for (std::size_t m = 0; m < grid.frames; ++m) {
    std::fill(buf.begin(), buf.end(), std::complex<double>(0.0, 0.0));
    const double* x = wave.samples.data() + m * cfg.hop;
    for (std::size_t n = 0; n < cfg.window_len; ++n) buf[n] = x[n] * window[n];
    dft_inplace(buf);
    std::copy_n(buf.begin(), grid.bins, grid.values.begin() + static_cast<std::ptrdiff_t>(m * grid.bins));
  }
  return grid;
}

double mel_scale(double f_hz) {
  if (!(f_hz >= 0.0)) throw DomainError("mel_scale: frequency must be non-negative");
  return 1127.0 * std::log1p(f_hz / 700.0);
}

double mel_to_hz(double mel) { return 700.0 * std::expm1(mel / 1127.0); }

MelFilterbank mel_filterbank(const MelConfig& cfg, std::size_t fft_len, int sample_rate_hz) {
  cfg.validate(sample_rate_hz);
  if (fft_len < 2) throw ConfigError("FFT length must be at least 2");
  MelFilterbank fb;
  fb.n_mels = cfg.n_mels;
  fb.n_bins = fft_len / 2 + 1;
  fb.weights.assign(fb.n_mels * fb.n_bins, 0.0);

  const double mel_lo = mel_scale(cfg.f_min_hz);
  const double mel_hi = mel_scale(cfg.f_max_hz);
  std::vector<double> edges(cfg.n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double mel = mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1);
    edges[i] = mel_to_hz(mel);
  }
  edges.front() = cfg.f_min_hz;
  edges.back() = cfg.f_max_hz;

  const double bin_hz = static_cast<double>(sample_rate_hz) / static_cast<double>(fft_len);
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    fb.center_hz.push_back(mid);
    bool any = false;
    for (std::size_t k = 0; k < fb.n_bins; ++k) {
      const double f = static_cast<double>(k) * bin_hz;
      const double rise = (f - lo) / (mid - lo);
      const double fall = (hi - f) / (hi - mid);
      const double w = std::max(0.0, std::min(rise, fall));
      fb.weights[m * fb.n_bins + k] = w;
      any = any || w > 0.0;
    }
    if (!any) {
      throw ConfigError("mel filter " + std::to_string(m) + " covers no FFT bin; reduce n_mels or raise fft_len");
    }
  }
  return fb;
}

SpectrogramGrid log_mel_spectrogram(const Waveform& wave, const StftConfig& stft_cfg, const MelConfig& mel_cfg,
                                    double eps) {
  StftConfig cfg = stft_cfg;
  cfg.onesided = true;
  const ComplexGrid spec = stft(wave, cfg);
  const MelFilterbank fb = mel_filterbank(mel_cfg, cfg.fft_len, wave.sample_rate_hz);

  SpectrogramGrid grid;
  grid.bins = fb.n_mels;
  grid.frames = spec.frames;
  grid.values.assign(grid.bins * grid.frames, 0.0);
  grid.bin_centers_hz = fb.center_hz;
  grid.hop = cfg.hop;

  std::vector<double> power(spec.bins);
  for (std::size_t m = 0; m < spec.frames; ++m) {
    for (std::size_t k = 0; k < spec.bins; ++k) power[k] = std::norm(spec(m, k));
    for (std::size_t b = 0; b < fb.n_mels; ++b) {
      const double* row = fb.weights.data() + b * fb.n_bins;
      double acc = 0.0;
      for (std::size_t k = 0; k < fb.n_bins; ++k) acc += row[k] * power[k];
      grid(b, m) = std::log(eps + acc);
    }
  }
  return grid;
}

SpectrogramGrid standardize(const SpectrogramGrid& grid) {
  if (grid.values.empty()) throw EmptyInputError("cannot standardize an empty grid");
  SpectrogramGrid out = grid;
  const double n = static_cast<double>(grid.values.size());
  double mean = 0.0;
  for (double v : grid.values) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : grid.values) var += (v - mean) * (v - mean);
  var /= n;
  const double sd = std::sqrt(var);
  if (sd <= 1e-12 * std::max(1.0, std::abs(mean))) {
    std::fill(out.values.begin(), out.values.end(), 0.0);
    out.degenerate = true;
    return out;
  }
  for (double& v : out.values) v = (v - mean) / sd;
  out.degenerate = false;
  return out;
}

Waveform reclip_audio(const Waveform& wave, const ReclipConfig& cfg) {
  wave.validate();
  if (cfg.frame_len < 1 || cfg.hop < 1) throw ConfigError("reclip frame and hop must be positive");
  if (cfg.relative_threshold < 0.0) throw ConfigError("reclip threshold must be non-negative");
  const std::size_t n = wave.samples.size();
  const std::size_t frame = std::min(cfg.frame_len, n);
  const std::size_t frames = (n - frame) / cfg.hop + 1;

  std::vector<double> energy(frames, 0.0);
  for (std::size_t m = 0; m < frames; ++m) {
    const double* x = wave.samples.data() + m * cfg.hop;
    for (std::size_t i = 0; i < frame; ++i) energy[m] += x[i] * x[i];
  }
  const double threshold = cfg.relative_threshold * *std::max_element(energy.begin(), energy.end());
  std::vector<bool> keep(frames);
  for (std::size_t m = 0; m < frames; ++m) keep[m] = energy[m] > threshold;

  if (cfg.min_segment_s > 0.0) {
    const double min_samples = cfg.min_segment_s * wave.sample_rate_hz;
    for (std::size_t m = 0; m < frames;) {
      if (!keep[m]) {
        ++m;
        continue;
      }
      std::size_t end = m;
      while (end < frames && keep[end]) ++end;
      const double span = static_cast<double>((end - 1 - m) * cfg.hop + frame);
      if (span < min_samples) std::fill(keep.begin() + static_cast<std::ptrdiff_t>(m),
                                        keep.begin() + static_cast<std::ptrdiff_t>(end), false);
      m = end;
    }
  }

  // A sample survives when any kept frame covers it; the uncovered tail
  // follows the last frame.
  std::vector<bool> sample_keep(n, false);
  for (std::size_t m = 0; m < frames; ++m) {
    if (!keep[m]) continue;
    std::fill(sample_keep.begin() + static_cast<std::ptrdiff_t>(m * cfg.hop),
              sample_keep.begin() + static_cast<std::ptrdiff_t>(m * cfg.hop + frame), true);
  }
  const std::size_t covered = (frames - 1) * cfg.hop + frame;
  if (keep.back()) std::fill(sample_keep.begin() + static_cast<std::ptrdiff_t>(covered), sample_keep.end(), true);

  Waveform out;
  out.sample_rate_hz = wave.sample_rate_hz;
  for (std::size_t i = 0; i < n; ++i) {
    if (sample_keep[i]) out.samples.push_back(wave.samples[i]);
  }
  if (out.samples.empty()) throw EmptyInputError("reclipping removed every frame");
  return out;
}

}  // namespace depest::signal
