#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lfm/image.hpp"
#include "lfm/net/network.hpp"

namespace lfm::net {

struct TrainPair {
    Tensor<float> in;     // {1, A_x, A_y, S_x, S_y}
    Tensor<float> target; // {nd, A_x*(S_x - fov + 1), A_y*(S_y - fov + 1)}
};

/// Builds a training pair from a light field tile and its reference crop.
/// The volume may cover either all S lenslets (central region is cut out)
/// or exactly the S - fov + 1 output lenslets.
TrainPair make_train_pair(const LightField4D& lf, const Volume3D& vol,
                          const NetworkSpec& spec);

struct TrainConfig {
    std::size_t epochs = 50;
    std::size_t batch = 8;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-8;
    double val_fraction = 0.2; // last fraction of the pair list, >= 1 pair
    std::uint64_t seed = 1;
};

struct TrainResult {
    std::vector<double> step_loss; // per optimizer step (batch mean MSE)
    std::vector<double> val_loss;  // per epoch
    std::size_t best_epoch = 0;
    double best_val = 0.0;
    std::size_t steps = 0;
};

/// Adaptive-moment minimization of the mean squared error. Deterministic:
/// epoch shuffles derive from the seed, samples accumulate in batch order,
/// and the best-validation weights are restored into net on return.
/// A non-finite loss aborts with NumericError.
TrainResult train(Network<float>& net, const std::vector<TrainPair>& pairs,
                  const TrainConfig& cfg);

/// Checkpoint: magic "LFMW", u32 little-endian header length, JSON header
/// {format, spec, tensors, metadata}, then little-endian f32 weights
/// concatenated in parameter-name order.
void save_checkpoint(Network<float>& net, const std::string& path,
                     const nlohmann::json& metadata);
Network<float> load_checkpoint(const std::string& path,
                               nlohmann::json* metadata = nullptr);

Tensor<float> lf_to_tensor(const LightField4D& lf);
Volume3D tensor_to_volume(const Tensor<float>& t);

/// Full-frame reconstruction with reflect padding of pad lenslets per
/// side; pad = (fov - 1) / 2 makes the output cover every input lenslet.
Volume3D infer_full(const Network<float>& net, const LightField4D& lf,
                    std::size_t pad_lenslets);

/// Tiled reconstruction covering all lenslets: tiles of tile_lenslets
/// output lenslets, each computed from a patch with enough margin that the
/// result matches infer_full bit-exactly whenever the receptive field fits
/// the margin; patches are stride-phase aligned with the full frame.
Volume3D infer_tiled(const Network<float>& net, const LightField4D& lf,
                     std::size_t tile_lenslets);

} // namespace lfm::net
