#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "llmpred/series.hpp"

namespace llmpred {

// Hyperparameters of the low-frequency refiner network. The network maps a
// length-H prediction to a length-H correction: five hidden affine layers
// (batch norm + tanh after each) and a final affine layer, applied as a
// residual on top of the input.
struct RefinerConfig {
    std::size_t input_dim = 48; // H; output dimension is the same
    std::vector<std::size_t> hidden_widths{128, 128, 128, 128, 128};
    bool batch_norm = true;
    double learning_rate = 1e-4;
    std::size_t batch_size = 32;
    std::size_t epochs = 32;
    double train_split = 0.7;
    std::uint64_t seed = 0;
    double bn_momentum = 0.1;
    double bn_epsilon = 1e-5;
};

// One fully-connected layer plus its (optional) batch-norm state. Weights
// are row-major [in][out].
struct RefinerLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> w;
    std::vector<double> b;
    // batch-norm parameters and running statistics (hidden layers only)
    std::vector<double> gamma;
    std::vector<double> beta;
    std::vector<double> running_mean;
    std::vector<double> running_var;
};

struct RefinerModel {
    RefinerConfig config;
    std::vector<RefinerLayer> hidden;
    RefinerLayer output;
    bool trained = false;
};

struct EpochStats {
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainingLog {
    double initial_val_loss = 0.0; // validation MSE of the untrained model
    double final_val_loss = 0.0;
    std::vector<EpochStats> epochs;
};

// A training example: (predicted low component, ground-truth low component),
// both length input_dim.
using RefinerPair = std::pair<std::vector<double>, std::vector<double>>;

// Fresh model with seeded initialization: Xavier-uniform hidden weights, a
// near-zero output layer (so the residual starts at the identity), zero
// biases, unit batch-norm scale.
RefinerModel init_refiner(const RefinerConfig& cfg);

// Trains with Adam on MSE over a seeded 70/30 split of the pairs. Throws
// InsufficientData (< 2 pairs), DimensionMismatch, NonFiniteLoss.
std::pair<RefinerModel, TrainingLog> train_refiner(const std::vector<RefinerPair>& pairs,
                                                   const RefinerConfig& cfg);

// Inference-mode forward pass (batch norm uses running statistics). Throws
// UntrainedModel / DimensionMismatch.
std::vector<double> refine_low(const RefinerModel& model, const std::vector<double>& predicted_low);
Series refine_low(const RefinerModel& model, const Series& predicted_low);

// Flat view of the trainable parameters (weights, biases, batch-norm scale
// and shift; running statistics excluded), in a fixed layer order. Used by
// the optimizer and by finite-difference tests.
std::vector<double> model_parameters(const RefinerModel& model);
void set_model_parameters(RefinerModel& model, const std::vector<double>& flat);

// Training-mode loss and analytic parameter gradient on one batch, without
// touching running statistics. Rows of x/y are length input_dim.
std::pair<double, std::vector<double>> training_loss_gradient(
    const RefinerModel& model, const std::vector<std::vector<double>>& x,
    const std::vector<std::vector<double>>& y);

// Checkpoint round trip (versioned JSON).
std::string refiner_to_json(const RefinerModel& model);
RefinerModel refiner_from_json(const std::string& text);

} // namespace llmpred
