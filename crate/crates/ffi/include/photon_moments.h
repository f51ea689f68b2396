#ifndef PHOTON_MOMENTS_H
#define PHOTON_MOMENTS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PmStatus {
  PM_STATUS_OK = 0,
  PM_STATUS_NULL_POINTER = 1,
  // Argument outside its domain, or malformed input.
  PM_STATUS_INVALID_ARGUMENT = 2,
  PM_STATUS_INVALID_STATISTICS = 3,
  // A photon number exceeds the truncation.
  PM_STATUS_TRUNCATION = 4,
  PM_STATUS_ZERO_MEAN = 5,
  PM_STATUS_UNDEFINED_ESTIMATOR = 6,
  PM_STATUS_NO_HERALDS = 7,
  // The output buffer is shorter than required.
  PM_STATUS_BUFFER_TOO_SMALL = 8,
  PM_STATUS_PANIC = 9,
} PmStatus;

// Displaced-photon model with partial mode overlap.
typedef struct PmModel PmModel;

// Photon-number distribution.
typedef struct PmStatistics PmStatistics;

// Result of a Klyshko calibration run.
typedef struct PmKlyshko {
  double efficiency;
  double std_error;
  uint64_t heralds;
  uint64_t coincidences;
  uint64_t accidentals;
  bool low_statistics;
} PmKlyshko;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL-terminated,
// truncated to `cap`). Returns the full message length excluding the NUL.
//
// # Safety
// `buf` must be valid for `cap` bytes or null.
size_t pm_last_error_message(char *buf, size_t cap);

// Statistics from `len` probabilities summing to one.
//
// # Safety
// `probs` must point to `len` doubles; `out` must be writable.
enum PmStatus pm_statistics_new(const double *probs, size_t len, struct PmStatistics **out);

// # Safety
// `out` must be writable.
enum PmStatus pm_statistics_fock(size_t n, size_t n_max, struct PmStatistics **out);

// # Safety
// `out` must be writable.
enum PmStatus pm_statistics_coherent(double mean, size_t n_max, struct PmStatistics **out);

// # Safety
// `out` must be writable.
enum PmStatus pm_statistics_heralded_pdc(double squeeze,
                                         double herald_efficiency,
                                         size_t n_max,
                                         struct PmStatistics **out);

// # Safety
// `stats` must come from this library and not be used afterwards.
void pm_statistics_free(struct PmStatistics *stats);

// Number of stored probabilities (n_max + 1), or 0 for a null handle.
//
// # Safety
// `stats` must be a valid handle or null.
size_t pm_statistics_len(const struct PmStatistics *stats);

// # Safety
// `stats` must be a valid handle; `buf` must hold `cap` doubles.
enum PmStatus pm_statistics_probs(const struct PmStatistics *stats, double *buf, size_t cap);

// # Safety
// `stats` must be a valid handle; `out` must be writable.
enum PmStatus pm_statistics_mean(const struct PmStatistics *stats, double *out);

// Probability mass lost to truncation.
//
// # Safety
// `stats` must be a valid handle; `out` must be writable.
enum PmStatus pm_statistics_truncation_deficit(const struct PmStatistics *stats, double *out);

// Binomial loss with transmission `eta`; returns a new handle.
//
// # Safety
// `stats` must be a valid handle; `out` must be writable.
enum PmStatus pm_apply_loss(const struct PmStatistics *stats,
                            double eta,
                            struct PmStatistics **out);

// Coherent displacement by a real amplitude of squared modulus `disp_sq`,
// truncated at `n_out`.
//
// # Safety
// `stats` must be a valid handle; `out` must be writable.
enum PmStatus pm_displace(const struct PmStatistics *stats,
                          double disp_sq,
                          size_t n_out,
                          struct PmStatistics **out);

// Factorial moments for m = 0..=m_max into `buf` (m_max + 1 values).
//
// # Safety
// `stats` must be a valid handle; `buf` must hold `cap` doubles.
enum PmStatus pm_factorial_moments(const struct PmStatistics *stats,
                                   size_t m_max,
                                   double *buf,
                                   size_t cap);

// Mean and g^(2)..g^(m_max) (m_max - 1 values into `g`).
//
// # Safety
// `stats` must be a valid handle; `mean` writable; `g` must hold `cap` doubles.
enum PmStatus pm_normalized_moments(const struct PmStatistics *stats,
                                    size_t m_max,
                                    double *mean,
                                    double *g,
                                    size_t cap);

// Moment generating function sum_n rho(n) (1 - mu)^n for mu in [0, 2].
//
// # Safety
// `stats` must be a valid handle; `out` must be writable.
enum PmStatus pm_mgf(const struct PmStatistics *stats, double mu, double *out);

// Photon statistics rho(0..=m_max) from the mean and `g_len` normalized
// moments g^(2)..; moments above m_max = g_len + 1 count as zero. Writes
// g_len + 2 values and whether all of them lie in [0, 1].
//
// # Safety
// `g` must hold `g_len` doubles, `probs` `cap` doubles; `physical` writable.
enum PmStatus pm_reconstruct(double mean,
                             const double *g,
                             size_t g_len,
                             double *probs,
                             size_t cap,
                             bool *physical);

// g^(m) of an ideal displaced single photon at displacement `disp_sq`.
double pm_g_ideal(size_t m, double disp_sq);

// # Safety
// `source` must be a valid handle; `out` must be writable.
enum PmStatus pm_model_new(const struct PmStatistics *source,
                           double overlap,
                           double disp_sq,
                           struct PmModel **out);

// # Safety
// `model` must come from this library and not be used afterwards.
void pm_model_free(struct PmModel *model);

// # Safety
// `model` must be a valid handle; `out` must be writable.
enum PmStatus pm_model_g_eff(const struct PmModel *model, size_t m, double *out);

// # Safety
// `model` must be a valid handle; `out` must be writable.
enum PmStatus pm_model_mean_eff(const struct PmModel *model, double *out);

// # Safety
// `model` must be a valid handle; `out` must be writable.
enum PmStatus pm_model_exact_statistics(const struct PmModel *model, struct PmStatistics **out);

// Mean photon number bounding the order-`m_max` reconstruction of the
// model, and whether the scan hit its ceiling instead.
//
// # Safety
// `model` must be a valid handle; outputs must be writable.
enum PmStatus pm_reliable_range(const struct PmModel *model,
                                size_t m_max,
                                double *mean,
                                bool *reached_ceiling);

// g3 / g4, with `unbounded` set (and an infinite bound) when g4 = 0.
//
// # Safety
// Outputs must be writable.
enum PmStatus pm_truncation_bound(double g3, double g4, double *bound, bool *unbounded);

// Coincidence estimate of g^(m) for a uniform `bins`-bin detector with
// per-photon efficiency `eta` and per-bin dark-click probability.
//
// # Safety
// `stats` must be a valid handle; `out` must be writable.
enum PmStatus pm_tmd_estimate_g(const struct PmStatistics *stats,
                                size_t bins,
                                double eta,
                                double dark_count,
                                size_t m,
                                double *out);

// Seeded Klyshko calibration on a simulated twin-beam run.
//
// # Safety
// `out` must be writable.
enum PmStatus pm_klyshko(double squeeze,
                         double eta_signal,
                         double eta_herald,
                         uint64_t trials,
                         uint64_t seed,
                         struct PmKlyshko *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PHOTON_MOMENTS_H */
