#ifndef THETAWALK_H
#define THETAWALK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TwBackend {
  // exact rationals
  TW_BACKEND_EXACT = 0,
  // doubles times scaleⁿ with renormalisation
  TW_BACKEND_SCALED = 1,
  // residues modulo a prime
  TW_BACKEND_MODULAR = 2,
} TwBackend;

// Status codes.
typedef enum TwStatus {
  TW_OK = 0,
  TW_NULL_POINTER = 1,
  TW_INVALID_ARGUMENT = 2,
  TW_BUFFER_TOO_SMALL = 3,
  // a series coefficient beyond its truncation order was requested
  TW_TRUNCATED = 4,
  TW_NOT_REPRESENTABLE = 5,
  TW_NO_CONVERGENCE = 6,
  TW_INSUFFICIENT_DATA = 7,
  TW_MEMORY = 8,
  TW_ILL_CONDITIONED = 9,
  TW_VERIFICATION = 10,
  // a bug: the library panicked
  TW_INTERNAL = 99,
} TwStatus;

typedef enum TwTemplate {
  // κ μⁿ n^(−α)(1 + c₁/n + …)
  TW_TEMPLATE_PLAIN = 0,
  // adds a (log n)/n correction
  TW_TEMPLATE_LOG_CORRECTED = 1,
} TwTemplate;

// Opaque a-model parameters.
typedef struct TwAmodel TwAmodel;

// Opaque table of walk counts.
typedef struct TwCountTable TwCountTable;

// Opaque step set.
typedef struct TwStepSet TwStepSet;

// Result of [`tw_fit_asymptotics`].
typedef struct TwFit {
  double mu;
  double alpha;
  double kappa;
  // NaN for the plain template
  double log_coeff;
  double alpha_spread;
  double mu_spread;
  double rms_residual;
  double condition;
  double richardson_mu;
  double richardson_alpha;
  size_t points;
} TwFit;

// Leading asymptotics of Kreweras excursions:
// `[t^{3n}] Q(0,0) ~ amplitude · growth^{3n} · n^exponent`.
typedef struct TwKrewerasAsymptotics {
  double amplitude;
  double exponent;
  double growth_per_step;
  uint32_t period;
} TwKrewerasAsymptotics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *tw_version(void);

// Message for the last failure on this thread (empty if none). The
// pointer stays valid until the next failing call on the same thread.
const char *tw_last_error(void);

// Parse `"dx,dy,w;dx,dy,w;…"` (weights are rationals such as `1/2`).
enum TwStatus tw_steps_parse(const char *spec, struct TwStepSet **out);

// Kreweras steps W, S, NE.
enum TwStatus tw_steps_kreweras(struct TwStepSet **out);

// N, E, S, W and NE with weight `a_num/a_den`.
enum TwStatus tw_steps_amodel(int64_t a_num, int64_t a_den, struct TwStepSet **out);

void tw_steps_free(struct TwStepSet *s);

// Canonical string form of a step set.
enum TwStatus tw_steps_to_string(const struct TwStepSet *s, char *buf, size_t len, size_t *needed);

// Count quadrant walks from the origin up to length `n_max`, tracking the
// `ncells` cells `(cells[2k], cells[2k+1])`. `param` is the scale for the
// scaled backend and the modulus for the modular one (0: the default).
enum TwStatus tw_count(const struct TwStepSet *steps,
                       size_t n_max,
                       enum TwBackend backend,
                       double param,
                       const size_t *cells,
                       size_t ncells,
                       struct TwCountTable **out);

void tw_count_free(struct TwCountTable *t);

enum TwStatus tw_count_n_max(const struct TwCountTable *t, size_t *out);

// Count as a double (may overflow to infinity for long walks).
enum TwStatus tw_count_value(const struct TwCountTable *t,
                             size_t i,
                             size_t j,
                             size_t n,
                             double *out);

// `ln(count · scaleⁿ)` for scaled tables.
enum TwStatus tw_count_log_scaled(const struct TwCountTable *t,
                                  size_t i,
                                  size_t j,
                                  size_t n,
                                  double *out);

// Exact count as a decimal rational string (exact tables only).
enum TwStatus tw_count_exact(const struct TwCountTable *t,
                             size_t i,
                             size_t j,
                             size_t n,
                             char *buf,
                             size_t len,
                             size_t *needed);

// Residue of the count (modular tables only).
enum TwStatus tw_count_modular(const struct TwCountTable *t,
                               size_t i,
                               size_t j,
                               size_t n,
                               uint64_t *out);

// Fit `κ μⁿ n^(−α)` to cell `(i, j)` over `lo ≤ n ≤ hi`, using every
// `period`-th length counted back from `hi`.
enum TwStatus tw_fit_asymptotics(const struct TwCountTable *t,
                                 size_t i,
                                 size_t j,
                                 enum TwTemplate template_,
                                 size_t lo,
                                 size_t hi,
                                 size_t period,
                                 struct TwFit *out);

enum TwStatus tw_kreweras_asymptotics(struct TwKrewerasAsymptotics *out);

// Parameters of the a-model at weight `a`, computed with `precision` bits.
enum TwStatus tw_amodel_new(double a, uint32_t precision, struct TwAmodel **out);

void tw_amodel_free(struct TwAmodel *m);

// Critical point `t_c`, exponent `ρ` (counts decay like `n^{-1-ρ}`),
// amplitude `C`, modulus-like parameter `k` and angle `β₀`.
enum TwStatus tw_amodel_constants(const struct TwAmodel *m,
                                  double *t_c,
                                  double *rho,
                                  double *c,
                                  double *k,
                                  double *beta0);

// First `count` coefficients `V(0), V(1), …` of the boundary harmonic
// function; `q(i,0;n) ~ C·V(i)·t_c^{-n}·n^{-1-ρ}`.
enum TwStatus tw_amodel_harmonic(const struct TwAmodel *m, size_t count, double *out);

// All parameters as JSON with full-precision decimal strings.
enum TwStatus tw_amodel_to_json(const struct TwAmodel *m, char *buf, size_t len, size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* THETAWALK_H */
