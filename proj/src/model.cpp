#include "capstext/model.hpp"

#include <sstream>

#include "capstext/error.hpp"
#include "capstext/fileio.hpp"

namespace capstext::trainer {

std::size_t ModelConfig::domain_index(const std::string& name) const {
  for (std::size_t i = 0; i < domains.size(); ++i) {
    if (domains[i] == name) return i;
  }
  throw InputError("model: unknown domain '" + name + "'");
}

void ModelConfig::validate() const {
  if (domains.size() < 2) {
    throw ConfigError("model: need at least 2 domains");
  }
  for (const auto& d : domains) {
    if (d.empty() || d.find_first_of(" \t\r\n") != std::string::npos) {
      throw ConfigError("model: domain names must be non-empty tokens");
    }
  }
  if (!(lambda_recon >= 0.0)) {
    throw ConfigError("model: lambda_recon must be non-negative");
  }
  if (mode == EncoderMode::toy) {
    encoder.validate();
  } else if (precomputed_dim == 0) {
    throw ConfigError("model: precomputed mode needs a hidden width");
  }
}

Model Model::init(const ModelConfig& config, const Vocabulary& vocab) {
  config.validate();
  Model model;
  model.config = config;
  model.vocab = vocab;
  if (config.mode == EncoderMode::toy) {
    numcore::RandomSource enc_rng(config.seed, 1);
    model.encoder = EncoderParams::init(config.encoder, vocab.size(), enc_rng);
  }
  capshead::CapsuleConfig head_config;
  head_config.hidden_dim = config.hidden_dim();
  head_config.num_domains = config.num_domains();
  numcore::RandomSource head_rng(config.seed, 2);
  model.head = CapsuleParams::init(head_config, head_rng);
  return model;
}

HiddenStates Model::encode_text(const std::string& normalized_text) const {
  if (config.mode != EncoderMode::toy) {
    throw ContractError("model: encode_text requires the toy encoder");
  }
  const TokenSequence seq =
      encoder::tokenize(normalized_text, vocab, config.encoder.max_seq_len);
  return encoder::encode(seq, encoder);
}

capshead::CapsuleForward Model::forward_hidden(const HiddenStates& hidden) const {
  return capshead::forward(hidden, head);
}

capshead::Prediction Model::predict_text(const std::string& normalized_text) const {
  return capshead::predict(forward_hidden(encode_text(normalized_text)));
}

namespace {

constexpr const char* kMagic = "CAPSTEXT-CKPT v1";

void write_tensor(std::string& out, const std::string& name, const Matrix& m) {
  out += "tensor " + name + " " + std::to_string(m.rows()) + " " +
         std::to_string(m.cols()) + "\n";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out.push_back(' ');
      out += format_double(m(i, j));
    }
    out.push_back('\n');
  }
}

struct CkptReader {
  std::istringstream stream;
  std::size_t line_number = 0;

  explicit CkptReader(const std::string& content) : stream(content) {}

  std::string next_line(const char* what) {
    std::string line;
    if (!std::getline(stream, line)) {
      throw ParseError("checkpoint: truncated file while reading " +
                       std::string(what) + " (line " +
                       std::to_string(line_number + 1) + ")");
    }
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  }

  // "key value" line with a fixed expected key.
  std::string keyed(const std::string& key) {
    const std::string line = next_line(key.c_str());
    if (line.size() < key.size() + 2 || line.compare(0, key.size(), key) != 0 ||
        line[key.size()] != ' ') {
      throw ParseError("checkpoint: expected '" + key + " ...' at line " +
                       std::to_string(line_number) + ", got '" + line + "'");
    }
    return line.substr(key.size() + 1);
  }
};

std::uint64_t parse_u64(const std::string& text, const std::string& context) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ParseError(context + ": bad integer '" + text + "'");
  }
}

std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ' ') {
      if (i > start) fields.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return fields;
}

Matrix read_tensor(CkptReader& reader, const std::string& expected_name) {
  const std::string header = reader.next_line("tensor header");
  auto fields = split_ws(header);
  if (fields.size() != 4 || fields[0] != "tensor") {
    throw ParseError("checkpoint: bad tensor header at line " +
                     std::to_string(reader.line_number));
  }
  if (fields[1] != expected_name) {
    throw ParseError("checkpoint: expected tensor '" + expected_name +
                     "', found '" + fields[1] + "' at line " +
                     std::to_string(reader.line_number));
  }
  const std::size_t rows = parse_u64(fields[2], "checkpoint tensor rows");
  const std::size_t cols = parse_u64(fields[3], "checkpoint tensor cols");
  Matrix m(rows, cols, 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::string line = reader.next_line("tensor row");
    auto values = split_ws(line);
    if (values.size() != cols) {
      throw ParseError("checkpoint: tensor row at line " +
                       std::to_string(reader.line_number) + " has " +
                       std::to_string(values.size()) + " values, expected " +
                       std::to_string(cols));
    }
    for (std::size_t j = 0; j < cols; ++j) {
      m(i, j) = parse_double(values[j],
                             "checkpoint line " + std::to_string(reader.line_number));
    }
  }
  return m;
}

}  // namespace

std::string checkpoint_to_string(const Model& model) {
  const ModelConfig& config = model.config;
  std::string out;
  out += kMagic;
  out.push_back('\n');
  out += "mode ";
  out += (config.mode == EncoderMode::toy ? "toy" : "precomputed");
  out.push_back('\n');
  out += "seed " + std::to_string(config.seed) + "\n";
  out += "lambda_recon " + format_double(config.lambda_recon) + "\n";
  out += "precomputed_dim " + std::to_string(config.precomputed_dim) + "\n";
  out += "hidden_dim " + std::to_string(config.encoder.hidden_dim) + "\n";
  out += "num_layers " + std::to_string(config.encoder.num_layers) + "\n";
  out += "num_heads " + std::to_string(config.encoder.num_heads) + "\n";
  out += "ff_dim " + std::to_string(config.encoder.ff_dim) + "\n";
  out += "max_seq_len " + std::to_string(config.encoder.max_seq_len) + "\n";
  out += "layer_norm_eps " + format_double(config.encoder.layer_norm_eps) + "\n";
  out += "domains " + std::to_string(config.domains.size());
  for (const auto& d : config.domains) {
    out.push_back(' ');
    out += d;
  }
  out.push_back('\n');

  out += "vocab " + std::to_string(model.vocab.size()) + "\n";
  for (const auto& token : model.vocab.tokens()) {
    out += token;
    out.push_back('\n');
  }

  std::size_t tensor_count = 0;
  const auto count_tensor = [&](const std::string&, const Matrix&) { ++tensor_count; };
  if (config.mode == EncoderMode::toy) {
    model.encoder.visit(count_tensor);
  }
  model.head.visit(count_tensor);
  out += "tensors " + std::to_string(tensor_count) + "\n";

  const auto dump_tensor = [&](const std::string& name, const Matrix& m) {
    write_tensor(out, name, m);
  };
  if (config.mode == EncoderMode::toy) {
    model.encoder.visit(dump_tensor);
  }
  model.head.visit(dump_tensor);
  out += "end\n";
  return out;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model) {
  write_text_file_atomic(path, checkpoint_to_string(model));
}

Model checkpoint_from_string(const std::string& content) {
  CkptReader reader(content);
  const std::string magic = reader.next_line("header");
  if (magic != kMagic) {
    throw ParseError("checkpoint: unsupported header '" + magic + "'");
  }

  ModelConfig config;
  const std::string mode = reader.keyed("mode");
  if (mode == "toy") {
    config.mode = EncoderMode::toy;
  } else if (mode == "precomputed") {
    config.mode = EncoderMode::precomputed;
  } else {
    throw ParseError("checkpoint: unknown mode '" + mode + "'");
  }
  config.seed = parse_u64(reader.keyed("seed"), "checkpoint seed");
  config.lambda_recon =
      parse_double(reader.keyed("lambda_recon"), "checkpoint lambda_recon");
  config.precomputed_dim =
      parse_u64(reader.keyed("precomputed_dim"), "checkpoint precomputed_dim");
  config.encoder.hidden_dim =
      parse_u64(reader.keyed("hidden_dim"), "checkpoint hidden_dim");
  config.encoder.num_layers =
      parse_u64(reader.keyed("num_layers"), "checkpoint num_layers");
  config.encoder.num_heads =
      parse_u64(reader.keyed("num_heads"), "checkpoint num_heads");
  config.encoder.ff_dim = parse_u64(reader.keyed("ff_dim"), "checkpoint ff_dim");
  config.encoder.max_seq_len =
      parse_u64(reader.keyed("max_seq_len"), "checkpoint max_seq_len");
  config.encoder.layer_norm_eps =
      parse_double(reader.keyed("layer_norm_eps"), "checkpoint layer_norm_eps");

  auto domain_fields = split_ws(reader.keyed("domains"));
  if (domain_fields.empty()) {
    throw ParseError("checkpoint: bad domains line");
  }
  const std::size_t num_domains = parse_u64(domain_fields[0], "checkpoint domains");
  if (domain_fields.size() != num_domains + 1) {
    throw ParseError("checkpoint: domains line declares " +
                     std::to_string(num_domains) + " names but carries " +
                     std::to_string(domain_fields.size() - 1));
  }
  config.domains.assign(domain_fields.begin() + 1, domain_fields.end());

  const std::size_t vocab_size = parse_u64(reader.keyed("vocab"), "checkpoint vocab");
  std::vector<std::string> tokens;
  tokens.reserve(vocab_size);
  for (std::size_t i = 0; i < vocab_size; ++i) {
    tokens.push_back(reader.next_line("vocabulary token"));
  }

  config.validate();

  Model model;
  model.config = config;
  model.vocab = Vocabulary::from_tokens(tokens);

  const std::size_t declared_tensors =
      parse_u64(reader.keyed("tensors"), "checkpoint tensors");
  std::size_t read_tensors = 0;
  if (config.mode == EncoderMode::toy) {
    numcore::RandomSource scratch_rng(0, 0);
    model.encoder =
        EncoderParams::init(config.encoder, model.vocab.size(), scratch_rng);
    model.encoder.visit([&](const std::string& name, Matrix& m) {
      Matrix loaded = read_tensor(reader, name);
      if (!loaded.same_shape(m)) {
        throw ParseError("checkpoint: tensor '" + name + "' has shape " +
                         loaded.shape_string() + ", expected " + m.shape_string());
      }
      m = std::move(loaded);
      ++read_tensors;
    });
  }
  capshead::CapsuleConfig head_config;
  head_config.hidden_dim = config.hidden_dim();
  head_config.num_domains = config.num_domains();
  numcore::RandomSource scratch_rng(0, 0);
  model.head = CapsuleParams::init(head_config, scratch_rng);
  model.head.visit([&](const std::string& name, Matrix& m) {
    Matrix loaded = read_tensor(reader, name);
    if (!loaded.same_shape(m)) {
      throw ParseError("checkpoint: tensor '" + name + "' has shape " +
                       loaded.shape_string() + ", expected " + m.shape_string());
    }
    m = std::move(loaded);
    ++read_tensors;
  });
  if (read_tensors != declared_tensors) {
    throw ParseError("checkpoint: declared " + std::to_string(declared_tensors) +
                     " tensors, found " + std::to_string(read_tensors));
  }
  if (reader.next_line("end marker") != "end") {
    throw ParseError("checkpoint: missing end marker");
  }
  return model;
}

Model load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_string(read_text_file(path));
}

}  // namespace capstext::trainer
