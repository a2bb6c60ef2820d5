#ifndef DUNMRI_H
#define DUNMRI_H

/* C interface to the reconstruction core. Every fallible call returns a
 * status code; on failure dunmri_last_error() holds a one-line message for
 * the calling thread. Output handles are written only on DUNMRI_OK and must
 * be released with the matching *_free. */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

enum {
    DUNMRI_OK = 0,
    DUNMRI_ERR_INVALID = 1, /* bad argument, config value, or precondition */
    DUNMRI_ERR_IO = 2,      /* missing or corrupt file, write failure */
    DUNMRI_ERR_INTERNAL = 3
};

const char* dunmri_last_error(void); /* never NULL; empty after a success */
const char* dunmri_version(void);

typedef struct dunmri_image dunmri_image;   /* complex [H,W] plane */
typedef struct dunmri_kspace dunmri_kspace; /* measurements + sampling mask */
typedef struct dunmri_model dunmri_model;   /* unrolled reconstruction network */

/* ---- images ---- */
/* kind: "shepp-logan-like" | "random-ellipses" */
int dunmri_image_phantom(int height, int width, const char* kind, uint64_t seed,
                         dunmri_image** out);
int dunmri_image_load(const char* path, dunmri_image** out);
int dunmri_image_save(const dunmri_image* img, const char* path);
int dunmri_image_dims(const dunmri_image* img, int* height, int* width);
/* 16-bit binary PGM of the magnitude, scaled to the image peak */
int dunmri_image_export_pgm(const dunmri_image* img, const char* path);
/* magnitude PSNR (dB) and SSIM; the data range is the reference peak */
int dunmri_image_compare(const dunmri_image* ref, const dunmri_image* test, double* psnr_db,
                         double* ssim);
void dunmri_image_free(dunmri_image* img);

/* ---- sampling masks and measurements ---- */
/* pattern: "random" | "equispaced" */
int dunmri_mask_create(const char* path, int width, int accel, const char* pattern,
                       uint64_t seed, int* total_lines, int* center_lines);
int dunmri_kspace_measure(const dunmri_image* img, int accel, const char* pattern,
                          uint64_t mask_seed, dunmri_kspace** out);
int dunmri_kspace_load(const char* path, dunmri_kspace** out);
int dunmri_kspace_save(const dunmri_kspace* k, const char* path);
/* complex Gaussian noise on sampled entries, sigma relative to mean |k| */
int dunmri_kspace_add_noise(const dunmri_kspace* k, double sigma, uint64_t seed,
                            dunmri_kspace** out);
int dunmri_kspace_info(const dunmri_kspace* k, int* height, int* width, int* coils,
                       int* total_lines, int* center_lines);
int dunmri_kspace_zero_filled(const dunmri_kspace* k, dunmri_image** out);
void dunmri_kspace_free(dunmri_kspace* k);

/* ---- trained models ---- */
int dunmri_model_load(const char* checkpoint, dunmri_model** out);
int dunmri_model_info(const dunmri_model* m, int* stages, int* base_channels, int* height,
                      int* width);
int dunmri_model_reconstruct(const dunmri_model* m, const dunmri_kspace* k, int dc_replace,
                             dunmri_image** out);
void dunmri_model_free(dunmri_model* m);

/* ---- dataset and composite runs ---- */
/* writes `count` phantom images plus manifest.txt into dir */
int dunmri_phantom_dataset(const char* dir, int count, int size, const char* kind,
                           uint64_t base_seed, int* files_written);
/* self-supervised training per a key=value config over a phantom directory;
 * resume_checkpoint NULL starts fresh, history_csv NULL keeps no log */
int dunmri_train_run(const char* config_path, const char* data_dir,
                     const char* resume_checkpoint, const char* out_checkpoint,
                     const char* history_csv, double* first_loss, double* last_loss,
                     int* steps);
/* finite-difference audit of the training gradients on a synthetic scene */
int dunmri_gradcheck_run(const char* config_path, int* passed, double* max_rel_err,
                         double* loss_value);
/* primal-dual solve; trace_csv NULL keeps no per-iteration log */
int dunmri_classical_run(const dunmri_kspace* k, double tau, double sigma, double theta,
                         double threshold, int max_iters, double tol, const char* trace_csv,
                         dunmri_image** out, int* iterations, double* final_residual);
/* PSNR/SSIM of two stored images; out_csv NULL skips the report file */
int dunmri_eval_images(const char* ref_path, const char* test_path, const char* out_csv,
                       double* psnr_db, double* ssim);

#ifdef __cplusplus
}
#endif

#endif /* DUNMRI_H */
