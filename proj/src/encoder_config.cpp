#include "notecoder/encoder_config.hpp"

#include "notecoder/errors.hpp"

namespace notecoder {

void EncoderConfig::validate() const {
  if (hidden_size <= 0) throw DataError("encoder config: hidden_size must be positive");
  if (num_layers < 0) throw DataError("encoder config: num_layers must be >= 0");
  if (num_heads <= 0) throw DataError("encoder config: num_heads must be positive");
  if (hidden_size % num_heads != 0)
    throw DataError("encoder config: hidden_size must be divisible by num_heads");
  if (intermediate_size <= 0) throw DataError("encoder config: intermediate_size must be positive");
  if (hidden_dropout < 0 || hidden_dropout >= 1)
    throw DataError("encoder config: hidden_dropout must be in [0,1)");
  if (attention_dropout < 0 || attention_dropout >= 1)
    throw DataError("encoder config: attention_dropout must be in [0,1)");
  if (max_len < 2) throw DataError("encoder config: max_len must be >= 2");
  if (vocab_size < 6) throw DataError("encoder config: vocab_size must cover specials");
  if (segment_types != 2) throw DataError("encoder config: segment_types must be 2");
}

nlohmann::ordered_json EncoderConfig::to_json() const {
  return {{"hidden_size", hidden_size},
          {"num_layers", num_layers},
          {"num_heads", num_heads},
          {"intermediate_size", intermediate_size},
          {"hidden_dropout", hidden_dropout},
          {"attention_dropout", attention_dropout},
          {"max_len", max_len},
          {"vocab_size", vocab_size},
          {"segment_types", segment_types}};
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.hidden_size = j.value("hidden_size", c.hidden_size);
  c.num_layers = j.value("num_layers", c.num_layers);
  c.num_heads = j.value("num_heads", c.num_heads);
  c.intermediate_size = j.value("intermediate_size", c.intermediate_size);
  c.hidden_dropout = j.value("hidden_dropout", c.hidden_dropout);
  c.attention_dropout = j.value("attention_dropout", c.attention_dropout);
  c.max_len = j.value("max_len", c.max_len);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.segment_types = j.value("segment_types", c.segment_types);
  return c;
}

EncoderConfig EncoderConfig::preset(const std::string& name) {
  EncoderConfig c;
  if (name == "desk") {
    c.hidden_size = 64;
    c.num_layers = 2;
    c.num_heads = 4;
    c.intermediate_size = 256;
    c.max_len = 128;
  } else if (name == "small") {
    c.hidden_size = 512;
    c.num_layers = 8;
    c.num_heads = 8;
    c.intermediate_size = 2048;
    c.max_len = 1024;
  } else if (name == "big") {
    c.hidden_size = 768;
    c.num_layers = 12;
    c.num_heads = 12;
    c.intermediate_size = 3072;
    c.max_len = 1024;
  } else {
    throw DataError("unknown encoder preset: " + name);
  }
  return c;
}

}  // namespace notecoder
