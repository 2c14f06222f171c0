#ifndef GPFL_H
#define GPFL_H

/* Generated by cbindgen from the gpfl-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Call succeeded.
#define GPFL_STATUS_OK 0

// Rejected input: NULL pointer, bad dimension, unparseable file.
#define GPFL_STATUS_INVALID 2

// Numerical failure: ill-conditioned kernel, singular dynamics, non-finite
// values, or an internal panic.
#define GPFL_STATUS_NUMERICAL 3

// Closed-loop failure: divergence, torque collapse, controller fault.
#define GPFL_STATUS_DEGRADED 4

// Opaque per-joint GP torque model handle.
typedef struct GpflModel GpflModel;

// Opaque rigid-body model handle.
typedef struct GpflRobot GpflRobot;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Pointer to the calling thread's last error message, empty until an error
// occurs. Valid until the next failing call on the same thread.
const char *gpfl_last_error(void);

// Loads a robot description from a JSON file.
//
// # Safety
// `path` must be a NUL-terminated string, `out` a valid pointer.
int gpfl_robot_load(const char *path, struct GpflRobot **out);

// Parses a robot description from a JSON string.
//
// # Safety
// `json` must be a NUL-terminated string, `out` a valid pointer.
int gpfl_robot_from_json(const char *json, struct GpflRobot **out);

// Frees a robot handle. NULL is ignored.
//
// # Safety
// `robot` must come from a gpfl_robot_* constructor and not be used again.
void gpfl_robot_free(struct GpflRobot *robot);

// Number of joints, or 0 for a NULL handle.
//
// # Safety
// `robot` must be a live handle or NULL.
size_t gpfl_robot_dof(const struct GpflRobot *robot);

// τ = B(q)q̈ + c(q,q̇) + g(q) + friction, written into `tau` (length n).
//
// # Safety
// `robot` must be live; `q`, `dq`, `ddq`, `tau` must point to n doubles.
int gpfl_robot_inverse_dynamics(const struct GpflRobot *robot,
                                const double *q,
                                const double *dq,
                                const double *ddq,
                                size_t n,
                                double *tau);

// Symmetric positive-definite joint-space inertia matrix, row-major n*n.
//
// # Safety
// `robot` must be live; `q` must point to n doubles, `out` to n*n.
int gpfl_robot_mass_matrix(const struct GpflRobot *robot, const double *q, size_t n, double *out);

// Gravity torques g(q), written into `out` (length n).
//
// # Safety
// `robot` must be live; `q` and `out` must point to n doubles.
int gpfl_robot_gravity(const struct GpflRobot *robot, const double *q, size_t n, double *out);

// Velocity-dependent plus gravity torques c(q,q̇) + g(q) + friction.
//
// # Safety
// `robot` must be live; `q`, `dq`, `out` must point to n doubles.
int gpfl_robot_bias(const struct GpflRobot *robot,
                    const double *q,
                    const double *dq,
                    size_t n,
                    double *out);

// Loads a trained torque model from its JSON file.
//
// # Safety
// `path` must be a NUL-terminated string, `out` a valid pointer.
int gpfl_model_load(const char *path, struct GpflModel **out);

// Frees a model handle. NULL is ignored.
//
// # Safety
// `model` must come from gpfl_model_load and not be used again.
void gpfl_model_free(struct GpflModel *model);

// Number of modeled joints, or 0 for a NULL handle.
//
// # Safety
// `model` must be a live handle or NULL.
size_t gpfl_model_joints(const struct GpflModel *model);

// Posterior mean torque at (q, q̇, q̈), one entry per joint.
//
// # Safety
// `model` must be live; `q`, `dq`, `ddq`, `tau` must point to n doubles.
int gpfl_model_predict_torque(const struct GpflModel *model,
                              const double *q,
                              const double *dq,
                              const double *ddq,
                              size_t n,
                              double *tau);

// Model-implied gravity torques, the prediction at zero velocity and zero
// acceleration.
//
// # Safety
// `model` must be live; `q` and `out` must point to n doubles.
int gpfl_model_gravity(const struct GpflModel *model, const double *q, size_t n, double *out);

// Model-implied inertia matrix from unit-acceleration probes, row-major.
//
// # Safety
// `model` must be live; `q` must point to n doubles, `out` to n*n.
int gpfl_model_inertia(const struct GpflModel *model, const double *q, size_t n, double *out);

// Model-implied torques that do not depend on acceleration.
//
// # Safety
// `model` must be live; `q`, `dq`, `out` must point to n doubles.
int gpfl_model_bias(const struct GpflModel *model,
                    const double *q,
                    const double *dq,
                    size_t n,
                    double *out);

// Feedback-linearizing torque through the GP model: the commanded
// acceleration from the (r, ṙ, r̈) sample and the pole placement (ω, ζ)
// is pushed through the model's posterior mean.
//
// # Safety
// `model` must be live; all arrays must point to n doubles.
int gpfl_gp_fl_torque(const struct GpflModel *model,
                      const double *r,
                      const double *dr,
                      const double *ddr,
                      const double *q,
                      const double *dq,
                      size_t n,
                      double omega,
                      double zeta,
                      double *tau);

// Feedback-linearizing torque through the model's extracted components:
// τ = B̂(q)·a + n̂(q, q̇).
//
// # Safety
// `model` must be live; all arrays must point to n doubles.
int gpfl_gp_fl_dce_torque(const struct GpflModel *model,
                          const double *r,
                          const double *dr,
                          const double *ddr,
                          const double *q,
                          const double *dq,
                          size_t n,
                          double omega,
                          double zeta,
                          double *tau);

// Feedback-linearizing torque through the true dynamics model.
//
// # Safety
// `robot` must be live; all arrays must point to n doubles.
int gpfl_exact_fl_torque(const struct GpflRobot *robot,
                         const double *r,
                         const double *dr,
                         const double *ddr,
                         const double *q,
                         const double *dq,
                         size_t n,
                         double omega,
                         double zeta,
                         double *tau);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GPFL_H */
