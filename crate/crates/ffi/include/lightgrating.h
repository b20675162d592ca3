#ifndef LIGHTGRATING_H
#define LIGHTGRATING_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LgStatus {
  LG_STATUS_OK = 0,
  LG_STATUS_NULL_ARGUMENT = 1,
  LG_STATUS_INVALID_UTF8 = 2,
  LG_STATUS_CONFIG = 3,
  LG_STATUS_NUMERICAL = 4,
  LG_STATUS_IO = 5,
  LG_STATUS_PATTERN = 6,
  LG_STATUS_BUFFER_TOO_SMALL = 7,
  LG_STATUS_PANIC = 8,
} LgStatus;

// Parsed simulation configuration.
typedef struct LgConfig LgConfig;

// Detector-plane diffraction pattern.
typedef struct LgPattern LgPattern;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or null. The
// pointer stays valid until the next failing call on the same thread.
const char *lg_last_error_message(void);

// Releases a string returned by this library.
//
// # Safety
// `s` must come from this library and not be freed twice.
void lg_string_free(char *s);

// Reference-apparatus configuration.
struct LgConfig *lg_config_default(void);

// Parses TOML configuration text.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum LgStatus lg_config_parse(const char *text, struct LgConfig **out);

// Reads a configuration file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum LgStatus lg_config_load(const char *path, struct LgConfig **out);

// Sets the power per beam in watts.
//
// # Safety
// `config` must be a live handle.
enum LgStatus lg_config_set_power(struct LgConfig *config, double power_w);

// Sets the worker thread count; 0 uses all cores.
//
// # Safety
// `config` must be a live handle.
enum LgStatus lg_config_set_threads(struct LgConfig *config, size_t threads);

// SHA-256 hex digest of the configuration. Free with [`lg_string_free`].
//
// # Safety
// `config` must be a live handle; `out` must be writable.
enum LgStatus lg_config_digest(const struct LgConfig *config, char **out);

// # Safety
// `config` must be null or a handle not yet freed.
void lg_config_free(struct LgConfig *config);

// Complex phase at velocity `v` (m/s) on the beam axis.
//
// # Safety
// `config` must be a live handle; `re` and `im` must be writable.
enum LgStatus lg_compute_phi(const struct LgConfig *config, double v, double *re, double *im);

// Incoherent order intensities for `|m| <= m_max`, written to
// `out[m + m_max]`; `len` must be at least `2 m_max + 1`.
//
// # Safety
// `out` must point to `len` writable doubles.
enum LgStatus lg_order_spectrum(double phi_re,
                                double phi_im,
                                size_t m_max,
                                double tail_eps,
                                double *out,
                                size_t len);

// Bessel function of the first kind, integer order.
//
// # Safety
// `out` must be writable.
enum LgStatus lg_bessel_j(uint32_t m, double x, double *out);

// Runs the ensemble simulation. Free the result with [`lg_pattern_free`].
//
// # Safety
// `config` must be a live handle; `out` must be writable.
enum LgStatus lg_simulate(const struct LgConfig *config, struct LgPattern **out);

// Number of detector samples, 0 for a null handle.
//
// # Safety
// `pattern` must be null or a live handle.
size_t lg_pattern_len(const struct LgPattern *pattern);

// Copies positions (m) and intensities into caller buffers of `len`
// doubles each. Either buffer may be null to skip it.
//
// # Safety
// Non-null buffers must hold `len` writable doubles.
enum LgStatus lg_pattern_copy(const struct LgPattern *pattern,
                              double *positions,
                              double *intensity,
                              size_t len);

// Probability inside the detector span before normalization, NaN for a
// null handle.
//
// # Safety
// `pattern` must be null or a live handle.
double lg_pattern_captured_probability(const struct LgPattern *pattern);

// # Safety
// `pattern` must be null or a handle not yet freed.
void lg_pattern_free(struct LgPattern *pattern);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LIGHTGRATING_H */
