#ifndef TCNER_H
#define TCNER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum TcnerStatus {
  TCNER_STATUS_OK = 0,
  TCNER_STATUS_NULL_ARG = 1,
  TCNER_STATUS_INVALID_UTF8 = 2,
  TCNER_STATUS_IO = 3,
  TCNER_STATUS_PARSE = 4,
  TCNER_STATUS_FORMAT = 5,
  TCNER_STATUS_INPUT = 6,
  TCNER_STATUS_ALIGNMENT = 7,
  TCNER_STATUS_CONFIG = 8,
  TCNER_STATUS_NUMERIC = 9,
  TCNER_STATUS_INTERNAL = 10,
  TCNER_STATUS_PANIC = 11,
} TcnerStatus;

/*
 Opaque tagger handle.
 */
typedef struct TcnerNerModel TcnerNerModel;

/*
 Opaque truecaser handle.
 */
typedef struct TcnerTruecaser TcnerTruecaser;

/*
 Precision, recall and F1 as fractions in [0, 1], plus raw counts.
 */
typedef struct TcnerScore {
  double precision;
  double recall;
  double f1;
  uint64_t tp;
  uint64_t fp;
  uint64_t fn_;
} TcnerScore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or an empty string. The
 pointer stays valid until the next failing call on the same thread.
 */
const char *tcner_last_error(void);

/*
 Releases a string returned by this library. Null is ignored.

 # Safety
 `s` must come from this library and not have been freed.
 */
void tcner_string_free(char *s);

/*
 Loads a truecaser model file into `*out`.

 # Safety
 `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum TcnerStatus tcner_truecaser_load(const char *path, struct TcnerTruecaser **out);

/*
 Restores case in `text`; the result is written to `*out`.

 # Safety
 `model` must come from [`tcner_truecaser_load`]; `text` must be a
 nul-terminated string and `out` a valid pointer.
 */
enum TcnerStatus tcner_truecaser_apply(const struct TcnerTruecaser *model,
                                       const char *text,
                                       char **out);

/*
 # Safety
 `model` must come from [`tcner_truecaser_load`] and not have been freed.
 Null is ignored.
 */
void tcner_truecaser_free(struct TcnerTruecaser *model);

/*
 Loads a tagger model file into `*out`.

 # Safety
 `path` must be a nul-terminated string and `out` a valid pointer.
 */
enum TcnerStatus tcner_ner_load(const char *path, struct TcnerNerModel **out);

/*
 Tags a space-separated sentence. `*out` receives one tag per token,
 separated by single spaces.

 # Safety
 `model` must come from [`tcner_ner_load`]; `sentence` must be a
 nul-terminated string and `out` a valid pointer.
 */
enum TcnerStatus tcner_ner_tag(const struct TcnerNerModel *model, const char *sentence, char **out);

/*
 # Safety
 `model` must come from [`tcner_ner_load`] and not have been freed. Null
 is ignored.
 */
void tcner_ner_free(struct TcnerNerModel *model);

/*
 Character-level truecasing score of `pred` against `gold`, both given
 as newline-separated lines.

 # Safety
 `gold` and `pred` must be nul-terminated strings and `out` a valid
 pointer.
 */
enum TcnerStatus tcner_char_f1(const char *gold, const char *pred, struct TcnerScore *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TCNER_H */
