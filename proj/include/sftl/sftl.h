/* sftl: two-party secure federated transfer learning.
 *
 * C interface to the shared library. All functionality is driven through an
 * opaque key/value config; operations return status codes and write a short
 * message into the caller's error buffer on failure.
 */
#ifndef SFTL_H
#define SFTL_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sftl_status {
  SFTL_OK = 0,
  SFTL_ERR_ARGS = 1,      /* bad key, value, or missing required option */
  SFTL_ERR_IO = 2,        /* file read/write failure */
  SFTL_ERR_DATA = 3,      /* malformed dataset */
  SFTL_ERR_TRANSPORT = 4, /* connection refused, timeout, peer closed */
  SFTL_ERR_MISMATCH = 5,  /* handshake parameter disagreement */
  SFTL_ERR_ABORT = 6,     /* cheating detected; session aborted */
  SFTL_ERR_PREPROC = 7,   /* offline material missing or exhausted */
  SFTL_ERR_INTERNAL = 8
} sftl_status;

typedef struct sftl_config sftl_config;
typedef struct sftl_result sftl_result;

const char* sftl_version(void);
const char* sftl_status_name(sftl_status s);

sftl_config* sftl_config_new(void);
void sftl_config_free(sftl_config* cfg);

/* Recognized keys (values are strings):
 *   role            S | T
 *   engine          sh | mal
 *   peer_host       connect to this host (client side)
 *   peer_port       port for peer_host
 *   listen_port     accept on this port (server side)
 *   preproc         this party's preprocessing file
 *   data            CSV path (shared by both parties)
 *   label_column    default "label"
 *   features_s/_t   comma-separated column names; empty = half split
 *   overlap_frac    default 0.2
 *   n_labeled       default 0 (all target rows)
 *   eta gamma lambda eps   training hyperparameters
 *   max_iter d frac_bits seed
 *   cheat           none | share | open | output
 *   cheat_target    event index for the injected corruption
 *   metrics_out     per-iteration CSV path
 *   weights_out / weights_in   weights file path
 *   samples         prediction batch size (target side)
 *   peer_weights    optional second weights file for the local
 *                   cleartext agreement report after prediction
 *   predict_samples extra prediction material when dealing
 *   out gen_samples gen_features_s gen_features_t noise   (generator)
 *   timeout_ms      transport timeout
 */
sftl_status sftl_config_set(sftl_config* cfg, const char* key, const char* value);

/* Dealer: sizes material exactly for the configured dataset/iterations and
 * writes "<preproc>.s" and "<preproc>.t". */
sftl_status sftl_deal(const sftl_config* cfg, char* err, size_t err_len);

/* One party of the training protocol. Blocks until convergence, max_iter,
 * or failure. */
sftl_status sftl_train(const sftl_config* cfg, sftl_result** out, char* err, size_t err_len);

/* One party of federated inference over the first `samples` target rows. */
sftl_status sftl_predict(const sftl_config* cfg, sftl_result** out, char* err, size_t err_len);

/* Synthetic dataset generator (writes `out`). */
sftl_status sftl_generate(const sftl_config* cfg, char* err, size_t err_len);

/* Offline-phase cost model, reporting only. engine: "sh" | "mal".
 * seconds is set to -1 when the model does not cover the engine. */
sftl_status sftl_offline_cost(const char* engine, uint64_t triples, double* bits,
                              double* seconds);

/* --- result accessors --- */
uint32_t sftl_result_iterations(const sftl_result* r);
int sftl_result_converged(const sftl_result* r);
uint64_t sftl_result_bytes_sent(const sftl_result* r);
uint64_t sftl_result_bytes_received(const sftl_result* r);
uint64_t sftl_result_rounds(const sftl_result* r);
uint64_t sftl_result_triples_used(const sftl_result* r);
size_t sftl_result_label_count(const sftl_result* r);
int sftl_result_label(const sftl_result* r, size_t i); /* +1 / -1 */
/* Prediction agreement with the local cleartext model when peer_weights
 * was supplied; -1 otherwise. */
double sftl_result_agreement(const sftl_result* r);
void sftl_result_free(sftl_result* r);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SFTL_H */
