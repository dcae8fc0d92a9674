/*
 * latentsteg C API.
 *
 * Every function returns an lsteg_status. On failure, lsteg_last_error()
 * returns a message for the calling thread that stays valid until that thread
 * makes its next API call. Objects are opaque handles released with their
 * matching *_free function (NULL is accepted). Strings returned through char**
 * are heap-allocated and released with lsteg_string_free.
 *
 * Latent tensors have shape (4, 64, 64); values are exchanged as row-major
 * doubles over (channel, row, col).
 */
#ifndef LATENTSTEG_H
#define LATENTSTEG_H

#include <stddef.h>
#include <stdint.h>

#if defined(LATENTSTEG_BUILDING_LIBRARY)
#define LSTEG_API __attribute__((visibility("default")))
#else
#define LSTEG_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lsteg_status {
  LSTEG_OK = 0,
  LSTEG_ERR_INVALID_ARGUMENT = 1,
  LSTEG_ERR_DIMENSION = 2,
  LSTEG_ERR_DEGENERATE_BASIS = 3,
  LSTEG_ERR_CONFIG = 4,
  LSTEG_ERR_IO = 5,
  LSTEG_ERR_CHANNEL = 6,
  LSTEG_ERR_UNATTAINABLE = 7,
  LSTEG_ERR_NO_CONVERGENCE = 8,
  LSTEG_ERR_INTERNAL = 99
} lsteg_status;

typedef struct lsteg_key lsteg_key;
typedef struct lsteg_carriers lsteg_carriers;
typedef struct lsteg_message lsteg_message;
typedef struct lsteg_latent lsteg_latent;
typedef struct lsteg_channel lsteg_channel;
typedef struct lsteg_fits lsteg_fits;

LSTEG_API const char* lsteg_version(void);
LSTEG_API const char* lsteg_last_error(void);
LSTEG_API const char* lsteg_status_name(lsteg_status status);
LSTEG_API void lsteg_string_free(char* s);

/* Keys ------------------------------------------------------------------- */

/* At least 16 bytes. */
LSTEG_API lsteg_status lsteg_key_from_bytes(const uint8_t* bytes, size_t len, lsteg_key** out);
LSTEG_API lsteg_status lsteg_key_from_hex(const char* hex, lsteg_key** out);
/* 32 key bytes derived from a seed; reproducible. */
LSTEG_API lsteg_status lsteg_key_from_seed(uint64_t seed, lsteg_key** out);
/* 32 key bytes from the operating system's entropy source. */
LSTEG_API lsteg_status lsteg_key_generate(lsteg_key** out);
/* Copies the key bytes; *len receives the key length even when cap is short. */
LSTEG_API lsteg_status lsteg_key_bytes(const lsteg_key* key, uint8_t* buf, size_t cap, size_t* len);
/* 16 hex digits plus NUL; cap must be >= 17. */
LSTEG_API lsteg_status lsteg_key_fingerprint(const lsteg_key* key, char* buf, size_t cap);
LSTEG_API void lsteg_key_free(lsteg_key* key);

/* Carrier matrix ----------------------------------------------------------- */

LSTEG_API lsteg_status lsteg_carriers_derive(const lsteg_key* key, int dim, lsteg_carriers** out);
LSTEG_API int lsteg_carriers_dim(const lsteg_carriers* q);
/* Row-major d*d copy. */
LSTEG_API lsteg_status lsteg_carriers_copy(const lsteg_carriers* q, double* out, size_t len);
LSTEG_API void lsteg_carriers_free(lsteg_carriers* q);

/* Messages ----------------------------------------------------------------- */

LSTEG_API lsteg_status lsteg_message_random(uint64_t seed, lsteg_message** out);
/* 2048 bytes, 8 bits per byte MSB first, bit 1 <-> +1. */
LSTEG_API lsteg_status lsteg_message_unpack(const uint8_t* bytes, size_t len, lsteg_message** out);
LSTEG_API lsteg_status lsteg_message_pack(const lsteg_message* m, uint8_t* buf, size_t cap,
                                          size_t* len);
LSTEG_API size_t lsteg_message_size(const lsteg_message* m);
/* Counts positions where both messages agree. */
LSTEG_API lsteg_status lsteg_message_compare(const lsteg_message* a, const lsteg_message* b,
                                             uint64_t* matching, uint64_t* total);
LSTEG_API void lsteg_message_free(lsteg_message* m);

/* Latents ------------------------------------------------------------------ */

LSTEG_API lsteg_status lsteg_embed_ss(const lsteg_message* m, const lsteg_carriers* q,
                                      lsteg_latent** out);
/* Scaled embedding; the chi_n norm is drawn from `seed` and returned in *s. */
LSTEG_API lsteg_status lsteg_embed_scaled_ss(const lsteg_message* m, const lsteg_carriers* q,
                                             uint64_t seed, lsteg_latent** out, double* s);
/* Sign decoding. `projection` (may be NULL) receives the raw Q^T Y Q
 * coefficients and must hold lsteg_latent_size() doubles. */
LSTEG_API lsteg_status lsteg_decode(const lsteg_latent* y, const lsteg_carriers* q,
                                    lsteg_message** out, double* projection, size_t len);
/* Cover seed X ~ N(0, I). */
LSTEG_API lsteg_status lsteg_latent_cover(uint64_t seed, lsteg_latent** out);
LSTEG_API lsteg_status lsteg_latent_from_values(const double* values, size_t len,
                                                lsteg_latent** out);
LSTEG_API size_t lsteg_latent_size(const lsteg_latent* x);
LSTEG_API lsteg_status lsteg_latent_norm(const lsteg_latent* x, double* norm);
LSTEG_API lsteg_status lsteg_latent_copy(const lsteg_latent* x, double* out, size_t len);
/* Raw f32le payload at `path` plus the JSON manifest at `path`.json. */
LSTEG_API lsteg_status lsteg_latent_save(const lsteg_latent* x, const char* path);
LSTEG_API lsteg_status lsteg_latent_load(const char* path, lsteg_latent** out);
LSTEG_API lsteg_status lsteg_latent_manifest(const lsteg_latent* x, char** json);
LSTEG_API void lsteg_latent_free(lsteg_latent* x);

/* Channel ------------------------------------------------------------------ */

/* `config_json` is a channel config object. With a non-NULL `exec_command`
 * the channel is served by that adapter process over JSON lines. */
LSTEG_API lsteg_status lsteg_channel_create(const char* config_json, const char* exec_command,
                                            lsteg_channel** out);
LSTEG_API lsteg_status lsteg_channel_apply(lsteg_channel* ch, const lsteg_latent* x,
                                           uint64_t seed, lsteg_latent** out);
/* File-to-file application; external adapters read and write the paths directly. */
LSTEG_API lsteg_status lsteg_channel_apply_file(lsteg_channel* ch, const char* in_path,
                                                const char* out_path, uint64_t seed);
/* Normalized config of a channel. */
LSTEG_API lsteg_status lsteg_channel_config(const lsteg_channel* ch, char** json);
LSTEG_API void lsteg_channel_free(lsteg_channel* ch);

/* `targets_json`: {"mean","var_cover","var_stego","shrink_gamma"} or
 * {"bit_accuracy"}; mode "norm-model" or "isotropic". The result JSON holds
 * "config", "achieved", "evaluations" and "notes". */
LSTEG_API lsteg_status lsteg_calibrate(const char* targets_json, const char* mode,
                                       uint64_t seed, char** result_json);

/* Statistics and detection ---------------------------------------------------- */

LSTEG_API lsteg_status lsteg_fit_gaussian(const double* values, size_t n, double* mu,
                                          double* sigma2);
/* {"cover": {"mu","sigma2","count"}, "stego": {...}} */
LSTEG_API lsteg_status lsteg_fits_from_json(const char* json, lsteg_fits** out);
LSTEG_API lsteg_status lsteg_fits_fit(const double* cover, size_t n_cover, const double* stego,
                                      size_t n_stego, lsteg_fits** out);
LSTEG_API lsteg_status lsteg_fits_to_json(const lsteg_fits* fits, char** json);
LSTEG_API void lsteg_fits_free(lsteg_fits* fits);
/* Pooled log likelihood ratio of a same-class batch. */
LSTEG_API lsteg_status lsteg_lrt_pooled(const lsteg_fits* fits, const double* norms, size_t n,
                                        double* log_lambda);
LSTEG_API lsteg_status lsteg_compute_pe(const double* cover_scores, size_t n_cover,
                                        const double* stego_scores, size_t n_stego, double* pe);

/* Experiments ---------------------------------------------------------------- */

LSTEG_API lsteg_status lsteg_experiment_validate(const char* config_json);
/* Generates the corpus, cross-validates and writes the report files into
 * `out_dir`. `exec_command` may be NULL; `threads` 0 means one per core.
 * *summary_json (may be NULL) receives P_E per batch size and bit accuracy. */
LSTEG_API lsteg_status lsteg_experiment_run(const char* config_json, const char* out_dir,
                                            const char* exec_command, unsigned threads,
                                            char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* LATENTSTEG_H */
