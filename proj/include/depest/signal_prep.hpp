#pragma once

#include <complex>
#include <cstddef>
#include <vector>

// Audio front-end: Hann-window STFT, mel filterbank, log-mel spectrogram,
// standardization and energy-based reclipping.

namespace depest::signal {

struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = 16000;

  /// Throws EmptyInputError / ConfigError on an invalid waveform.
  void validate() const;
  double duration_s() const { return static_cast<double>(samples.size()) / sample_rate_hz; }
};

/// Hop default: floor(16000 / 30), i.e. one audio frame per 30 Hz video frame.
inline constexpr std::size_t kDefaultHop = 16000 / 30;

struct StftConfig {
  std::size_t window_len = 1024;
  std::size_t hop = kDefaultHop;
  std::size_t fft_len = 1024;
  /// Keep only bins 0..fft_len/2 (real input makes the rest redundant).
  bool onesided = true;

  void validate() const;
  std::size_t bins() const { return onesided ? fft_len / 2 + 1 : fft_len; }
};

struct MelConfig {
  std::size_t n_mels = 80;
  double f_min_hz = 0.0;
  double f_max_hz = 8000.0;

  void validate(int sample_rate_hz) const;
};

/// Complex STFT, frame-major: value(m, k) = X[m, k].
struct ComplexGrid {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<std::complex<double>> values;

  std::complex<double> operator()(std::size_t m, std::size_t k) const { return values[m * bins + k]; }
};

/// Real grid, bin-major: value(b, m) with b the frequency bin and m the frame.
struct SpectrogramGrid {
  std::size_t bins = 0;
  std::size_t frames = 0;
  std::vector<double> values;
  std::vector<double> bin_centers_hz;
  std::size_t hop = 0;
  /// Set by standardize() when the input had zero spread.
  bool degenerate = false;

  double& operator()(std::size_t b, std::size_t m) { return values[b * frames + m]; }
  double operator()(std::size_t b, std::size_t m) const { return values[b * frames + m]; }
};

struct MelFilterbank {
  std::size_t n_mels = 0;
  std::size_t n_bins = 0;
  /// n_mels x n_bins, row-major.
  std::vector<double> weights;
  std::vector<double> center_hz;

  double operator()(std::size_t m, std::size_t k) const { return weights[m * n_bins + k]; }
};

/// Periodic Hann window w[n] = 0.5 (1 - cos(2 pi n / L)), 0 <= n < L.
std::vector<double> hann_window(std::size_t length);

/// floor((n - L) / H) + 1; zero when n < L.
std::size_t stft_frame_count(std::size_t n_samples, const StftConfig& cfg);

/// X[m, k] = sum_{n<L} x[n + mH] w[n] exp(-j 2 pi n k / fft_len), unnormalized.
/// Frames that would run past the end of the signal are not emitted.
ComplexGrid stft(const Waveform& wave, const StftConfig& cfg);

/// In-place forward DFT (radix-2 when the size is a power of two, direct
/// summation otherwise).
void dft_inplace(std::vector<std::complex<double>>& data);

/// 1127 ln(1 + f / 700). Throws DomainError for negative input.
double mel_scale(double f_hz);
double mel_to_hz(double mel);

/// Triangular filters with centers equally spaced in mel between f_min and
/// f_max. Throws ConfigError when a filter catches no FFT bin.
MelFilterbank mel_filterbank(const MelConfig& cfg, std::size_t fft_len, int sample_rate_hz);

inline constexpr double kLogFloor = 1e-10;

/// log(eps + filterbank * |X|^2), n_mels x frames.
SpectrogramGrid log_mel_spectrogram(const Waveform& wave, const StftConfig& stft_cfg, const MelConfig& mel_cfg,
                                    double eps = kLogFloor);

/// (Y - mean) / stdev over all cells. A constant grid yields zeros with
/// `degenerate` set.
SpectrogramGrid standardize(const SpectrogramGrid& grid);

struct ReclipConfig {
  /// Frames with energy <= relative_threshold * max frame energy are removed.
  double relative_threshold = 1e-4;
  /// Runs of surviving frames shorter than this are removed too.
  double min_segment_s = 0.0;
  std::size_t frame_len = 1024;
  std::size_t hop = kDefaultHop;
};

/// Drops low-energy frames and concatenates the surviving samples.
/// Throws EmptyInputError when nothing survives.
Waveform reclip_audio(const Waveform& wave, const ReclipConfig& cfg);

}  // namespace depest::signal
