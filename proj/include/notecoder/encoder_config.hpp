#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace notecoder {

struct EncoderConfig {
  int64_t hidden_size = 64;
  int64_t num_layers = 2;
  int64_t num_heads = 4;
  int64_t intermediate_size = 256;
  double hidden_dropout = 0.1;
  double attention_dropout = 0.1;
  int64_t max_len = 128;
  int64_t vocab_size = 0;  // set from the vocabulary before init
  int64_t segment_types = 2;

  int64_t head_dim() const { return hidden_size / num_heads; }

  // Throws DataError naming the violated constraint.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);

  // "desk" (d=64, 2 layers), "small" (512/8) and "big" (768/12) presets.
  static EncoderConfig preset(const std::string& name);
};

}  // namespace notecoder
