#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "hyperflow/config.hpp"
#include "hyperflow/errors.hpp"
#include "hyperflow/train.hpp"

namespace hyperflow::train {
namespace {

constexpr char kMagic[4] = {'H', 'F', 'L', 'W'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | p[i];
  return v;
}

struct Entry {
  std::string name;
  std::string dtype;  // "f8" or "u8"
  std::vector<std::size_t> shape;
  std::vector<std::uint64_t> words;  // raw bit patterns
};

Entry f8(std::string name, const Tensor& t) {
  Entry e{std::move(name), "f8", t.shape(), {}};
  e.words.reserve(t.size());
  for (double v : t.values()) e.words.push_back(std::bit_cast<std::uint64_t>(v));
  return e;
}

Entry u8(std::string name, const std::vector<std::uint64_t>& words) {
  return Entry{std::move(name), "u8", {words.size()}, words};
}

}  // namespace

void save_checkpoint(const TrainState& state, const std::filesystem::path& path) {
  std::vector<Entry> entries;
  entries.push_back(f8("encoder", state.encoder));
  entries.push_back(f8("decoder", state.hyper.decoder));
  entries.push_back(f8("prior", state.hyper.prior));
  entries.push_back(f8("encoder.m", state.encoder_opt.m));
  entries.push_back(f8("encoder.v", state.encoder_opt.v));
  entries.push_back(f8("decoder.m", state.decoder_opt.m));
  entries.push_back(f8("decoder.v", state.decoder_opt.v));
  entries.push_back(f8("prior.m", state.prior_opt.m));
  entries.push_back(f8("prior.v", state.prior_opt.v));
  entries.push_back(f8("sln", Tensor::vector({state.mu, state.sigma})));
  entries.push_back(u8("counters", {state.step, static_cast<std::uint64_t>(state.epoch)}));
  entries.push_back(u8("rng", state.rng.state()));

  config::Json manifest;
  manifest["model"] = config::to_json(state.model);
  config::Json list = config::Json::array();
  std::uint64_t offset = 0;
  for (const Entry& e : entries) {
    list.push_back(config::Json{
        {"name", e.name}, {"dtype", e.dtype}, {"shape", e.shape}, {"offset", offset}});
    offset += 8 * e.words.size();
  }
  manifest["entries"] = std::move(list);
  manifest["payload_bytes"] = offset;
  const std::string text = manifest.dump();

  std::string out(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  for (const Entry& e : entries) {
    for (std::uint64_t w : e.words) put_u64(out, w);
  }

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError("cannot write checkpoint " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError("cannot move checkpoint into place: " + ec.message());
}

TrainState load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint " + path.string());
  std::ostringstream buf;
  buf << f.rdbuf();
  const std::string bytes = buf.str();
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::string where = " in " + path.string();

  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError("not a HFLW checkpoint" + where);
  }
  const std::uint32_t version = get_u32(p + 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version) + where);
  }
  const std::uint32_t mlen = get_u32(p + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(mlen)) {
    throw CheckpointError("truncated manifest" + where);
  }
  config::Json manifest;
  try {
    manifest = config::Json::parse(bytes.substr(12, mlen));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt manifest: ") + e.what() + where);
  }
  const std::size_t base = 12 + mlen;

  TrainState s;
  std::map<std::string, Entry> found;
  try {
    s.model = config::model_from_json(manifest.at("model"));
    s.model.validate();
    const std::uint64_t payload = manifest.at("payload_bytes").get<std::uint64_t>();
    if (bytes.size() != base + payload) {
      throw CheckpointError("truncated payload: expected " + std::to_string(base + payload) +
                            " bytes, found " + std::to_string(bytes.size()) + where);
    }
    for (const auto& item : manifest.at("entries")) {
      Entry e;
      e.name = item.at("name").get<std::string>();
      e.dtype = item.at("dtype").get<std::string>();
      e.shape = item.at("shape").get<std::vector<std::size_t>>();
      const std::uint64_t offset = item.at("offset").get<std::uint64_t>();
      const std::size_t count = shape_product(e.shape);
      if (offset + 8 * count > payload) {
        throw CheckpointError("entry " + e.name + " runs past the payload" + where);
      }
      e.words.resize(count);
      for (std::size_t i = 0; i < count; ++i) e.words[i] = get_u64(p + base + offset + 8 * i);
      found[e.name] = std::move(e);
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed manifest: ") + e.what() + where);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid model in manifest: ") + e.what() + where);
  }

  auto take = [&](const std::string& name, const char* dtype) -> const Entry& {
    auto it = found.find(name);
    if (it == found.end()) throw CheckpointError("missing entry " + name + where);
    if (it->second.dtype != dtype) throw CheckpointError("entry " + name + " has wrong dtype" + where);
    return it->second;
  };
  auto tensor = [&](const std::string& name, std::size_t expected) {
    const Entry& e = take(name, "f8");
    std::vector<double> values(e.words.size());
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = std::bit_cast<double>(e.words[i]);
    if (values.size() != expected) {
      throw CheckpointError("entry " + name + " holds " + std::to_string(values.size()) +
                            " values, model needs " + std::to_string(expected) + where);
    }
    return Tensor(e.shape, std::move(values));
  };

  const std::size_t ne = s.model.encoder.parameter_count();
  const std::size_t nd = s.model.hyper.decoder().parameter_count();
  const std::size_t np = s.model.hyper.prior_dynamics().parameter_count();
  s.encoder = tensor("encoder", ne);
  s.hyper.decoder = tensor("decoder", nd);
  s.hyper.prior = tensor("prior", np);
  s.encoder_opt = {tensor("encoder.m", ne), tensor("encoder.v", ne)};
  s.decoder_opt = {tensor("decoder.m", nd), tensor("decoder.v", nd)};
  s.prior_opt = {tensor("prior.m", np), tensor("prior.v", np)};
  const Tensor sl = tensor("sln", 2);
  s.mu = sl[0];
  s.sigma = sl[1];
  const Entry& counters = take("counters", "u8");
  if (counters.words.size() != 2) throw CheckpointError("bad counters entry" + where);
  s.step = counters.words[0];
  s.epoch = static_cast<int>(counters.words[1]);
  try {
    s.rng = Rng::from_state(take("rng", "u8").words);
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad rng state: ") + e.what() + where);
  }
  return s;
}

}  // namespace hyperflow::train
