/* C interface for the dvs view-synthesis library.
 * Maintained by hand to match crates/ffi/src/lib.rs. */

#ifndef DVS_H
#define DVS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Error codes returned by the functions below. */
enum {
    DVS_OK = 0,
    DVS_ERR_INVALID_ARGUMENT = 1,
    DVS_ERR_IO = 2,
    DVS_ERR_MISSING_DATA = 3,
    DVS_ERR_BAD_BUNDLE = 4,
    DVS_ERR_INTERNAL = 5,
};

/* Opaque handle to a loaded scene bundle. */
typedef struct DvsScene DvsScene;

/* Message of the most recent error on the calling thread; empty string if
 * the last call succeeded. Valid until the next failing call. */
const char *dvs_last_error(void);

/* Loads a scene bundle directory. Returns NULL on failure. */
DvsScene *dvs_scene_load(const char *dir);

/* Frees a scene handle. NULL is a no-op. */
void dvs_scene_free(DvsScene *scene);

/* Number of frames in the scene; 0 for NULL. */
size_t dvs_scene_frame_count(const DvsScene *scene);

/* Writes the analytic synthetic scene bundle (size x size pixels, the given
 * frame count) under dir. */
int dvs_gen_synthetic(const char *dir, uint32_t size, size_t frames);

/* Renders the scene at the given time from the temporally nearest frame's
 * camera, optionally moved to pose (3 doubles: x, y, z; may be NULL).
 * Writes render.png, dyn_mask.png, and hole_mask.png into out_dir. */
int dvs_render(const DvsScene *scene, double time, const double *pose,
               const char *out_dir);

/* Least-squares scale/shift aligning source depths onto reference depths.
 * Both arrays hold len samples. */
int dvs_align_depth(const double *source, const double *reference, size_t len,
                    double *scale, double *shift);

/* PSNR in dB between two interleaved [0,1] float images of identical
 * row-major layout with `channels` floats per pixel. */
int dvs_psnr(const float *a, const float *b, size_t width, size_t height,
             size_t channels, double *out_db);

#ifdef __cplusplus
}
#endif

#endif /* DVS_H */
