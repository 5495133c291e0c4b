#ifndef PARTYPES_H
#define PARTYPES_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum PtStatus {
  PT_STATUS_OK = 0,
  PT_STATUS_NULL_ARGUMENT = 1,
  PT_STATUS_INVALID_UTF8 = 2,
  PT_STATUS_PARSE_ERROR = 3,
  PT_STATUS_BINDING_ERROR = 4,
  /**
   * Size excluded by the protocol header, or protocol ill-formed at it.
   */
  PT_STATUS_PRECONDITION = 5,
  PT_STATUS_PROJECTION_ERROR = 6,
  PT_STATUS_INVALID_ARGUMENT = 7,
  PT_STATUS_PANIC = 99,
} PtStatus;

typedef struct PtBindings PtBindings;

typedef struct PtProgram PtProgram;

typedef struct PtProtocol PtProtocol;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failed call on this thread. The pointer stays
 * valid until the next call from the same thread.
 */
const char *pt_last_error(void);

/**
 * Parses protocol text into `*out`.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` valid for writing.
 */
enum PtStatus pt_protocol_parse(const char *source, struct PtProtocol **out);

/**
 * # Safety
 * `p` must be null or a handle from [`pt_protocol_parse`] not yet freed.
 */
void pt_protocol_free(struct PtProtocol *p);

/**
 * Parses program text into `*out`.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` valid for writing.
 */
enum PtStatus pt_program_parse(const char *source, struct PtProgram **out);

/**
 * # Safety
 * `p` must be null or a handle from [`pt_program_parse`] not yet freed.
 */
void pt_program_free(struct PtProgram *p);

/**
 * Parses a bindings JSON document into `*out`.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` valid for writing.
 */
enum PtStatus pt_bindings_parse(const char *source, struct PtBindings **out);

/**
 * # Safety
 * `b` must be null or a handle from [`pt_bindings_parse`] not yet freed.
 */
void pt_bindings_free(struct PtBindings *b);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void pt_string_free(char *s);

/**
 * Well-formedness report over sizes `min..=max`, as JSON. `*ok` is set to
 * whether every admitted size is free of errors.
 *
 * # Safety
 * `proto` must be a live handle; `ok` and `out_json` valid for writing.
 */
enum PtStatus pt_check(const struct PtProtocol *proto,
                       int64_t min,
                       int64_t max,
                       bool *ok,
                       char **out_json);

/**
 * Projection of every rank at `size`, as JSON.
 *
 * # Safety
 * `proto` must be a live handle and `out_json` valid for writing.
 */
enum PtStatus pt_project(const struct PtProtocol *proto, int64_t size, char **out_json);

/**
 * Conformance of `prog` to `proto` at `size`. `bindings` may be null when
 * the program declares no externs. `*passed` receives the verdict.
 *
 * # Safety
 * Handles must be live (or null for `bindings`); `passed` and `out_json`
 * valid for writing.
 */
enum PtStatus pt_verify(const struct PtProgram *prog,
                        const struct PtProtocol *proto,
                        const struct PtBindings *bindings,
                        int64_t size,
                        bool *passed,
                        char **out_json);

/**
 * Runs `prog` at `size` ranks under synchronous communication. `*ok` is
 * true when every rank terminated without deadlock or fault.
 *
 * # Safety
 * `prog` must be a live handle, `bindings` live or null; `ok` and
 * `out_json` valid for writing.
 */
enum PtStatus pt_simulate(const struct PtProgram *prog,
                          const struct PtBindings *bindings,
                          int64_t size,
                          bool *ok,
                          char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARTYPES_H */
