#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shiftsr/dataio.hpp"
#include "shiftsr/losses.hpp"
#include "shiftsr/models.hpp"
#include "shiftsr/schedule.hpp"

namespace shiftsr {

struct TrainConfig {
    int iterations = 2000;
    int batch_size = 8;
    double lr_teacher = 5e-5;
    double lr_student = 5e-5;
    double lr_disc = 1e-4;
    LossWeights weights;
    ScheduleConfig schedule;
    std::uint64_t seed = 0;
    int checkpoint_every = 500;
    bool weight_by_wt = false;
    bool teacher_single_call = false;
    bool cache_teacher_targets = true;

    void validate() const;
};

struct TeacherTrainResult {
    std::vector<double> losses;
    std::int64_t iterations = 0;
};

// Denoising pretraining: per step sample a pair, encode, draw a uniform
// timestep and noise, diffuse the clean latent, and regress the prediction
// back to it. Checkpoints land in out_dir (kind "teacher") on the configured
// cadence; resume_dir restores parameters, optimizer, RNG, and data position.
TeacherTrainResult train_teacher(const TrainConfig& cfg, Codec& codec, MiniUNet& net,
                                 PairStream& data, const std::string& out_dir = "",
                                 const std::string& resume_dir = "",
                                 const std::string& config_text = "");

struct DistillResult {
    std::vector<LossReport> losses;
    std::int64_t iterations = 0;
    std::uint64_t teacher_checksum = 0;
    std::uint64_t student_init_checksum = 0;
    std::int64_t teacher_cache_hits = 0;
    std::int64_t teacher_cache_misses = 0;
};

// One-step distillation with alternating updates: per iteration the student
// matches the teacher's full sampling output (latent MSE + detail-band MSE),
// aligns decoded images with ground truth through the embedder, and fights
// the discriminator; the discriminator then trains on (real latent, detached
// student latent) with hinge losses. The student is initialized from the
// teacher when their parameter sets line up. Checkpoints use kind "distill"
// with "student." / "disc." tensor prefixes.
DistillResult distill(const TrainConfig& cfg, Codec& codec, Denoiser& teacher,
                      MiniUNet& student, PatchDiscriminator& disc, Embedder& embedder,
                      PairStream& data, const std::string& out_dir = "",
                      const std::string& resume_dir = "", const std::string& config_text = "");

}  // namespace shiftsr
