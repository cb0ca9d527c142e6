#ifndef IFEPIC_H
#define IFEPIC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IfepicStatus {
  IFEPIC_STATUS_OK = 0,
  IFEPIC_STATUS_NULL_ARGUMENT = 1,
  IFEPIC_STATUS_INVALID_STRING = 2,
  IFEPIC_STATUS_CONFIG = 3,
  IFEPIC_STATUS_IO = 4,
  IFEPIC_STATUS_GEOMETRY = 5,
  IFEPIC_STATUS_NUMERICAL = 6,
  IFEPIC_STATUS_PROTOCOL = 7,
  /**
   * The handle was already finished.
   */
  IFEPIC_STATUS_FINISHED = 8,
  IFEPIC_STATUS_BUFFER_TOO_SMALL = 9,
  IFEPIC_STATUS_OUT_OF_RANGE = 10,
  IFEPIC_STATUS_PANIC = 11,
  IFEPIC_STATUS_OTHER = 12,
} IfepicStatus;

/**
 * Opaque simulation handle.
 */
typedef struct IfepicSimulation IfepicSimulation;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *ifepic_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ifepic_version(void);

/**
 * Build a simulation from TOML text and run its initial field solve.
 *
 * # Safety
 * `config_toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IfepicStatus ifepic_simulation_from_toml(const char *config_toml,
                                              struct IfepicSimulation **out);

/**
 * As [`ifepic_simulation_from_toml`], reading the configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum IfepicStatus ifepic_simulation_load(const char *path, struct IfepicSimulation **out);

/**
 * Advance `steps` PIC steps.
 *
 * # Safety
 * `sim` must come from this library and not have been freed.
 */
enum IfepicStatus ifepic_simulation_step(struct IfepicSimulation *sim, size_t steps);

/**
 * # Safety
 * `sim` must be live and `out` valid.
 */
enum IfepicStatus ifepic_simulation_current_step(struct IfepicSimulation *sim, size_t *out);

/**
 * # Safety
 * `sim` must be live and `out` valid.
 */
enum IfepicStatus ifepic_simulation_species_count(struct IfepicSimulation *sim, size_t *out);

/**
 * Number of macro-particles of `species` over all ranks.
 *
 * # Safety
 * `sim` must be live and `out` valid.
 */
enum IfepicStatus ifepic_simulation_particle_count(struct IfepicSimulation *sim,
                                                   size_t species,
                                                   size_t *out);

/**
 * Global node counts per axis; the potential has their product entries,
 * x fastest.
 *
 * # Safety
 * `sim` must be live and `dims` point to three `size_t`.
 */
enum IfepicStatus ifepic_simulation_node_dims(struct IfepicSimulation *sim, size_t *dims);

/**
 * Copy the global nodal potential into `buf` of `len` doubles.
 *
 * # Safety
 * `sim` must be live and `buf` valid for `len` writes.
 */
enum IfepicStatus ifepic_simulation_copy_potential(struct IfepicSimulation *sim,
                                                   double *buf,
                                                   size_t len);

/**
 * Write the final outputs. The handle stays allocated but later calls
 * other than free return `Finished`.
 *
 * # Safety
 * `sim` must come from this library and not have been freed.
 */
enum IfepicStatus ifepic_simulation_finish(struct IfepicSimulation *sim);

/**
 * Release a handle. Null is ignored.
 *
 * # Safety
 * `sim` must come from this library and not be used afterwards.
 */
void ifepic_simulation_free(struct IfepicSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* IFEPIC_H */
