#ifndef VISA_H
#define VISA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call.
 */
typedef enum VisaStatus {
  VISA_STATUS_OK = 0,
  VISA_STATUS_NULL_POINTER = 1,
  VISA_STATUS_INVALID_ARGUMENT = 2,
  VISA_STATUS_BUFFER_TOO_SMALL = 3,
  VISA_STATUS_IO = 4,
  VISA_STATUS_CORRUPT_BUNDLE = 5,
  VISA_STATUS_NOT_A_PACKET = 6,
  VISA_STATUS_CORRUPT_PACKET = 7,
  VISA_STATUS_WRONG_MODEL = 8,
  VISA_STATUS_PANIC = 9,
  VISA_STATUS_INTERNAL = 10,
} VisaStatus;

/**
 * Opaque handle to a loaded model.
 */
typedef struct VisaModel VisaModel;

/**
 * Fixed facts about a loaded model.
 */
typedef struct VisaModelInfo {
  size_t input_height;
  size_t input_width;
  size_t base_channels;
  size_t latent_channels;
  /**
   * Latent floats for one frame at the input size.
   */
  size_t code_len;
  size_t epochs_trained;
  /**
   * First 16 bytes of the weights digest; packets carry the same bytes.
   */
  uint8_t digest16[16];
} VisaModelInfo;

/**
 * Header fields of one transmission packet.
 */
typedef struct VisaPacketInfo {
  uint32_t frame_index;
  bool is_final;
  uint16_t orig_height;
  uint16_t orig_width;
  uint16_t payload_height;
  uint16_t payload_width;
  size_t payload_len;
  uint8_t model_digest16[16];
} VisaPacketInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Stable lowercase name for a status, e.g. `"buffer_too_small"`.
 */
const char *visa_status_name(enum VisaStatus status);

/**
 * Message for the latest failure on this thread, or null if none.
 * Valid until the next failing call on the same thread.
 */
const char *visa_last_error_message(void);

/**
 * Loads a bundle directory. On success `*out` owns a handle that must be
 * released with [`visa_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum VisaStatus visa_model_load(const char *path, struct VisaModel **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `model` must come from [`visa_model_load`] and not be used afterwards.
 */
void visa_model_free(struct VisaModel *model);

/**
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum VisaStatus visa_model_info(const struct VisaModel *model, struct VisaModelInfo *out);

/**
 * Latent length for a frame of the given size (both multiples of 64).
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum VisaStatus visa_code_len(const struct VisaModel *model,
                              size_t height,
                              size_t width,
                              size_t *out);

/**
 * Encodes one frame. `*written` receives the code length.
 *
 * # Safety
 * `pixels` holds `3*height*width` floats; `code_out` holds `code_capacity`.
 */
enum VisaStatus visa_encode(const struct VisaModel *model,
                            const float *pixels,
                            size_t height,
                            size_t width,
                            float *code_out,
                            size_t code_capacity,
                            size_t *written);

/**
 * Decodes a code produced for a `height x width` frame.
 *
 * # Safety
 * `code` holds `code_len` floats; `pixels_out` holds `pixels_capacity`.
 */
enum VisaStatus visa_decode(const struct VisaModel *model,
                            const float *code,
                            size_t code_len,
                            size_t height,
                            size_t width,
                            float *pixels_out,
                            size_t pixels_capacity);

/**
 * Encode/decode round trip repeated `iterations` times; 0 copies the input.
 *
 * # Safety
 * Buffers hold `3*height*width` floats.
 */
enum VisaStatus visa_project(const struct VisaModel *model,
                             const float *pixels,
                             size_t height,
                             size_t width,
                             size_t iterations,
                             float *pixels_out,
                             size_t pixels_capacity);

/**
 * Upsamples a low-resolution frame to the model input size, then reprojects
 * `iterations` times. The output holds `3*input_height*input_width` floats.
 *
 * # Safety
 * `pixels` holds `3*height*width` floats; `pixels_out` holds `pixels_capacity`.
 */
enum VisaStatus visa_superres(const struct VisaModel *model,
                              const float *pixels,
                              size_t height,
                              size_t width,
                              size_t iterations,
                              float *pixels_out,
                              size_t pixels_capacity);

/**
 * Decodes `alpha*a + (1-alpha)*b`; `alpha` must lie in `[0, 1]`.
 *
 * # Safety
 * Both codes hold `code_len` floats; `pixels_out` holds `pixels_capacity`.
 */
enum VisaStatus visa_interpolate(const struct VisaModel *model,
                                 const float *code_a,
                                 const float *code_b,
                                 size_t code_len,
                                 size_t height,
                                 size_t width,
                                 float alpha,
                                 float *pixels_out,
                                 size_t pixels_capacity);

/**
 * PSNR in dB between two frames of equal size, capped for identical frames.
 *
 * # Safety
 * Both buffers hold `3*height*width` floats; `out` must be writable.
 */
enum VisaStatus visa_psnr(const float *a, const float *b, size_t height, size_t width, double *out);

/**
 * Parses the header of one wire packet and checks its CRC.
 *
 * # Safety
 * `bytes` holds `len` bytes; `out` must be writable.
 */
enum VisaStatus visa_packet_info(const uint8_t *bytes, size_t len, struct VisaPacketInfo *out);

/**
 * Decodes a packet payload into a planar frame of
 * `3*payload_height*payload_width` floats.
 *
 * # Safety
 * `bytes` holds `len` bytes; `pixels_out` holds `pixels_capacity` floats.
 */
enum VisaStatus visa_packet_frame(const uint8_t *bytes,
                                  size_t len,
                                  float *pixels_out,
                                  size_t pixels_capacity);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VISA_H */
