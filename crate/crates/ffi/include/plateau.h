#ifndef PLATEAU_H
#define PLATEAU_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Run the path formula even when the split condition fails.
#define PLATEAU_ACKNOWLEDGE_NONSPLIT 1

// Estimate every parameter's gradient variance alongside the loss variance.
#define PLATEAU_ALL_PARAMS 2

typedef enum PlateauStatus {
  PLATEAU_STATUS_OK = 0,
  PLATEAU_STATUS_NULL_ARGUMENT = 1,
  PLATEAU_STATUS_INVALID_UTF8 = 2,
  // Malformed Pauli string.
  PLATEAU_STATUS_PARSE = 3,
  // Malformed or inconsistent document, or an out-of-range argument.
  PLATEAU_STATUS_INVALID = 4,
  PLATEAU_STATUS_CAP_EXCEEDED = 5,
  PLATEAU_STATUS_MISSING_GADGET_LAYER = 6,
  PLATEAU_STATUS_NOT_SPLIT = 7,
  PLATEAU_STATUS_ACTIVATION_INFEASIBLE = 8,
  PLATEAU_STATUS_IO = 9,
  PLATEAU_STATUS_PANIC = 10,
} PlateauStatus;

typedef struct PlateauCircuit PlateauCircuit;

typedef struct PlateauEstimate PlateauEstimate;

typedef struct PlateauObservable PlateauObservable;

// One estimate. `quantity` is 0 for the loss variance and 1 for a gradient
// variance; `param_index` is -1 for the loss; `samples` is 0 for exact results.
typedef struct PlateauEstimateRow {
  uint32_t quantity;
  int64_t param_index;
  double mean;
  double std_error;
  uint64_t samples;
  uint64_t seed;
} PlateauEstimateRow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failing call on this thread, or null. Owned by the library.
const char *plateau_last_error(void);

// Library version as a static NUL-terminated string.
const char *plateau_version(void);

// Parses circuit JSON into a new handle.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum PlateauStatus plateau_circuit_from_json(const char *json, struct PlateauCircuit **out);

// # Safety
// `c` must be null or a handle from this library that has not been freed.
void plateau_circuit_free(struct PlateauCircuit *c);

// Serializes a circuit; release the string with [`plateau_string_free`].
//
// # Safety
// `c` must be a live circuit handle and `out` a writable pointer.
enum PlateauStatus plateau_circuit_to_json(const struct PlateauCircuit *c, char **out);

// # Safety
// `c` must be a live circuit handle.
size_t plateau_circuit_num_params(const struct PlateauCircuit *c);

// Total wire count, system plus ancilla.
//
// # Safety
// `c` must be a live circuit handle.
size_t plateau_circuit_num_qubits(const struct PlateauCircuit *c);

// Inserts a gadget layer before gate `position`. `op` is "fixed" or "trainable".
//
// # Safety
// `c` must be a live circuit handle, `op` a NUL-terminated string and `out` writable.
enum PlateauStatus plateau_insert_gadget_layer(const struct PlateauCircuit *c,
                                               size_t position,
                                               const char *op,
                                               struct PlateauCircuit **out);

// Parses observable JSON. `n_qubits` = 0 infers the width from the terms.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
enum PlateauStatus plateau_observable_from_json(const char *json,
                                                size_t n_qubits,
                                                struct PlateauObservable **out);

// # Safety
// `o` must be null or a handle from this library that has not been freed.
void plateau_observable_free(struct PlateauObservable *o);

// Estimates the loss variance and, with [`PLATEAU_ALL_PARAMS`], every gradient
// variance. `samples` = 0 enumerates exactly.
//
// # Safety
// `c` and `o` must be live handles and `out` a writable pointer.
enum PlateauStatus plateau_estimate(const struct PlateauCircuit *c,
                                    const struct PlateauObservable *o,
                                    uint64_t samples,
                                    uint64_t seed,
                                    uint32_t flags,
                                    struct PlateauEstimate **out);

// # Safety
// `e` must be a live estimate handle.
size_t plateau_estimate_len(const struct PlateauEstimate *e);

// Copies row `index` into `row`.
//
// # Safety
// `e` must be a live estimate handle and `row` writable.
enum PlateauStatus plateau_estimate_row(const struct PlateauEstimate *e,
                                        size_t index,
                                        struct PlateauEstimateRow *row);

// # Safety
// `e` must be null or a handle from this library that has not been freed.
void plateau_estimate_free(struct PlateauEstimate *e);

// Closed-form loss-variance lower bound for a circuit with a gadget layer.
//
// # Safety
// `c` and `o` must be live handles and `out` writable.
enum PlateauStatus plateau_variance_lower_bound(const struct PlateauCircuit *c,
                                                const struct PlateauObservable *o,
                                                double *out);

// Maximum deviation of the quarter-turn second moment from the uniform one.
//
// # Safety
// `generator` must be a NUL-terminated Pauli string and `out` writable.
enum PlateauStatus plateau_two_design_deviation(const char *generator, double *out);

// # Safety
// `s` must be null or a string returned by this library that has not been freed.
void plateau_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLATEAU_H */
