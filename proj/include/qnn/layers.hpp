#pragma once

#include <string>
#include <vector>

#include "qnn/tape.hpp"

namespace qnn {

/// Where the selectable activation sits relative to the layer formula.
///   none: the formula exactly as written (including any built-in mid relu).
///   post: kind applied to the whole layer output.
///   mid:  kind replaces the formula's marked mid-activation site; formats
///         without such a site reject this mode. mid+identity strips the
///         built-in mid relu.
enum class PlacementMode { none, post, mid };

PlacementMode parse_placement(const std::string& name);
std::string placement_name(PlacementMode m);

struct ActivationPlacement {
    PlacementMode mode = PlacementMode::none;
    Act kind = Act::relu;
};

/// qnn_alpha head weight scope: local maps the head's own slice (parameter
/// count M*D^2/H); full maps the whole input for each head (M*D^2).
enum class HeadInput { local, full };

struct NeuronFormatSpec {
    std::string name;  // mlp, crossnetv2, t1..t25, qnn_alpha
    ActivationPlacement placement;
    std::size_t dims = 0;  // input width D
    std::size_t M = 1;     // qnn_alpha expansion rows
    std::size_t H = 1;     // qnn_alpha heads
    HeadInput head_input = HeadInput::local;
    bool residual = true;  // built-in +X terms; off for degree-scaling studies
    bool bias = false;
};

/// Static registry row describing one formula.
struct FormatInfo {
    const char* name;
    const char* formula;  // display form
    bool uses_a, uses_b, uses_c;
    bool has_alpha;    // t22 gate
    bool is_qnn;       // qnn_alpha block
    bool has_mid;      // formula contains a replaceable mid-activation site
    bool concat_out;   // output width 2D
    bool needs_x1;     // references the first-order feature X_1
    bool has_residual; // formula carries a bare +X (or alpha.X) term
};

const FormatInfo& registry_lookup(const std::string& name);
const std::vector<std::string>& format_names();

/// Validated spec constructor; throws ConfigError on bad combinations.
NeuronFormatSpec make_format_spec(const std::string& name, std::size_t dims,
                                  ActivationPlacement placement = {},
                                  std::size_t M = 1, std::size_t H = 1,
                                  HeadInput head_input = HeadInput::local);

/// Learnable tensors owned by one layer. Unused slots stay empty.
struct LayerParams {
    Tensor W_a, W_b, W_c;
    Tensor alpha;              // t22 gate, initialized to ones
    std::vector<Tensor> krp;   // qnn_alpha: H tensors [M x Dh x In]
    Tensor bias;               // [output width] when enabled

    /// Stable iteration order for optimizers/serialization.
    std::vector<std::pair<std::string, Tensor*>> named();
};

/// Fan-in uniform init on [-1/sqrt(fan_in), 1/sqrt(fan_in)]; alpha=ones,
/// bias=zeros. Draw order is fixed so a seed pins every weight.
LayerParams init_params(const NeuronFormatSpec& spec, Rng& rng);

/// Exact learnable scalar count for the spec.
std::size_t param_count(const NeuronFormatSpec& spec);

/// Output width (dims, or 2*dims for concat formats).
std::size_t output_width(const NeuronFormatSpec& spec);

/// The layer's parameters as tape leaves for one forward/backward.
struct LayerVars {
    Var W_a, W_b, W_c, alpha, bias;
    std::vector<Var> krp;  // reshaped to [(M*Dh) x In]
};

LayerVars push_params(Tape& t, const NeuronFormatSpec& spec, const LayerParams& p);

/// Evaluates the format's formula on a batch X [B x D] (X1 is the first-order
/// feature for crossnetv2). Returns [B x D] or [B x 2D] for concat formats.
/// Rank-1 [D] inputs are accepted and give rank-1 outputs.
Var layer_forward(Tape& t, const NeuronFormatSpec& spec, const LayerVars& v, Var X, Var X1);

}  // namespace qnn
