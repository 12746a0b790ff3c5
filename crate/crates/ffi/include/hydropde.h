#ifndef HYDROPDE_H
#define HYDROPDE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PeStatus {
  PeStatus_Ok = 0,
  PeStatus_NullPointer = 1,
  PeStatus_InvalidArgument = 2,
  PeStatus_Shape = 3,
  PeStatus_Domain = 4,
  PeStatus_Singular = 5,
  PeStatus_OutOfRange = 6,
  PeStatus_Io = 7,
  PeStatus_Format = 8,
  PeStatus_NonFinite = 9,
  PeStatus_Panic = 10,
} PeStatus;

/**
 * Spectral velocity (or scalar) field.
 */
typedef struct PeField PeField;

/**
 * Periodic box discretization.
 */
typedef struct PeGrid PeGrid;

/**
 * Hydrostatic Stokes operator on a fixed grid.
 */
typedef struct PeStokes PeStokes;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes (without the terminating NUL) of the last error message.
 */
uintptr_t pe_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL-terminated, truncated to
 * `len - 1` bytes). Returns the number of bytes written, excluding the NUL.
 *
 * # Safety
 * `buf` must point to at least `len` writable bytes.
 */
uintptr_t pe_last_error_message(char *buf, uintptr_t len);

/**
 * # Safety
 * `out` must be a valid pointer to a handle slot.
 */
enum PeStatus pe_grid_new(uintptr_t nx,
                          uintptr_t ny,
                          uintptr_t nz,
                          double depth,
                          struct PeGrid **out);

/**
 * # Safety
 * `grid` must be null or a handle from `pe_grid_new` not yet freed.
 */
void pe_grid_free(struct PeGrid *grid);

/**
 * # Safety
 * `grid` must be a live handle; the outputs must be valid pointers.
 */
enum PeStatus pe_grid_dims(const struct PeGrid *grid, uintptr_t *nx, uintptr_t *ny, uintptr_t *nz);

/**
 * # Safety
 * `grid` must be a live handle and `out` a valid handle slot.
 */
enum PeStatus pe_field_zeros(const struct PeGrid *grid, uintptr_t components, struct PeField **out);

/**
 * Random real field in the band `|kx|, |ky| <= kmax`, `m <= mmax`,
 * dealiased, reproducible from `seed`.
 *
 * # Safety
 * `grid` must be a live handle and `out` a valid handle slot.
 */
enum PeStatus pe_field_random(const struct PeGrid *grid,
                              uintptr_t components,
                              uint64_t seed,
                              int64_t kmax,
                              uintptr_t mmax,
                              double decay,
                              struct PeField **out);

/**
 * # Safety
 * `field` must be null or a live field handle.
 */
void pe_field_free(struct PeField *field);

/**
 * Sets mode `(kx, ky, m)` of component `c` and its conjugate partner.
 *
 * # Safety
 * `field` must be a live handle.
 */
enum PeStatus pe_field_set_mode(struct PeField *field,
                                uintptr_t c,
                                int64_t kx,
                                int64_t ky,
                                uintptr_t m,
                                double re,
                                double im);

/**
 * # Safety
 * `field` must be a live handle; `re`, `im` valid pointers.
 */
enum PeStatus pe_field_get_mode(const struct PeField *field,
                                uintptr_t c,
                                int64_t kx,
                                int64_t ky,
                                uintptr_t m,
                                double *re,
                                double *im);

/**
 * Number of complex coefficients; `pe_field_copy_coeffs` needs twice as
 * many doubles.
 *
 * # Safety
 * `field` must be a live handle and `len` a valid pointer.
 */
enum PeStatus pe_field_len(const struct PeField *field, uintptr_t *len);

/**
 * Copies coefficients as interleaved `re, im` pairs, layout
 * `(component, ix, iy, m)` with `m` fastest.
 *
 * # Safety
 * `buf` must point to `len` writable doubles.
 */
enum PeStatus pe_field_copy_coeffs(const struct PeField *field, double *buf, uintptr_t len);

/**
 * # Safety
 * `field` must be a live handle and `out` a valid pointer.
 */
enum PeStatus pe_field_l2_norm(const struct PeField *field, double *out);

/**
 * Divergence-free projection of a two-component field onto the basis.
 *
 * # Safety
 * `field` must be a live handle and `out` a valid handle slot.
 */
enum PeStatus pe_project(const struct PeField *field, struct PeField **out);

/**
 * # Safety
 * `grid` must be a live handle and `out` a valid handle slot.
 */
enum PeStatus pe_stokes_new(const struct PeGrid *grid, struct PeStokes **out);

/**
 * # Safety
 * `op` must be null or a live handle.
 */
void pe_stokes_free(struct PeStokes *op);

/**
 * Smallest eigenvalue of the operator.
 *
 * # Safety
 * `op` must be a live handle and `out` a valid pointer.
 */
enum PeStatus pe_stokes_beta(const struct PeStokes *op, double *out);

/**
 * `e^{-tA} f`.
 *
 * # Safety
 * Handles must be live and `out` a valid handle slot.
 */
enum PeStatus pe_stokes_semigroup(const struct PeStokes *op,
                                  double t,
                                  const struct PeField *field,
                                  struct PeField **out);

/**
 * Solves `(lambda + A) v = P f` for `lambda = re + i im`.
 *
 * # Safety
 * Handles must be live and `out` a valid handle slot.
 */
enum PeStatus pe_stokes_resolvent(const struct PeStokes *op,
                                  double re,
                                  double im,
                                  const struct PeField *field,
                                  struct PeField **out);

/**
 * # Safety
 * `field` must be a live handle and `path` a NUL-terminated string.
 */
enum PeStatus pe_checkpoint_save(const struct PeField *field, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid handle slot.
 */
enum PeStatus pe_checkpoint_load(const char *path, struct PeField **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYDROPDE_H */
