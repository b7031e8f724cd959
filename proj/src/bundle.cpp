#include "bci/bundle.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "bci/version.hpp"

namespace bci::io {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "payload format is little-endian float32");

void atomic_write(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::Io, "cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(out.good(), ErrorKind::Io, "short write to '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string hash_file(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  std::ostringstream out;
  out << "fnv1a64:" << std::hex << fnv1a64(bytes);
  return out.str();
}

void write_bundle(const std::filesystem::path& stem, const Recording& rec,
                  const BundleMeta& meta) {
  json header;
  header["id"] = rec.id();
  header["subject"] = meta.subject;
  header["session"] = to_string(meta.session);
  header["transition"] = to_string(meta.transition);
  header["montage"] = meta.standard_montage ? "standard_11" : "none";
  header["fs"] = rec.fs();
  header["samples"] = rec.n_samples();
  header["channels"] = json::array();
  for (const auto& ch : rec.channels())
    header["channels"].push_back({{"name", ch.name},
                                  {"kind", to_string(ch.kind)},
                                  {"unit", ch.unit}});
  atomic_write(stem.string() + ".json", header.dump(2) + "\n");

  std::string payload;
  payload.resize(static_cast<std::size_t>(rec.n_channels()) *
                 static_cast<std::size_t>(rec.n_samples()) * 4);
  std::size_t at = 0;
  for (Eigen::Index c = 0; c < rec.n_channels(); ++c) {
    for (Eigen::Index s = 0; s < rec.n_samples(); ++s) {
      const float v = static_cast<float>(rec.data()(c, s));
      std::memcpy(payload.data() + at, &v, 4);
      at += 4;
    }
  }
  atomic_write(stem.string() + ".f32", payload);

  std::ostringstream events;
  for (const auto& ev : rec.events())
    events << ev.sample << "," << to_string(ev.label) << ","
           << to_string(ev.transition) << "\n";
  atomic_write(stem.string() + ".events", events.str());
}

Bundle read_bundle(const std::filesystem::path& stem) {
  json header;
  try {
    header = json::parse(read_file(stem.string() + ".json"));
  } catch (const json::exception& e) {
    raise(ErrorKind::Io, "bundle '" + stem.string() + "': bad header: " + e.what());
  }

  BundleMeta meta;
  std::vector<ChannelMeta> channels;
  double fs = 0;
  std::int64_t samples = 0;
  std::string id;
  try {
    id = header.at("id").get<std::string>();
    meta.subject = header.at("subject").get<std::string>();
    meta.session = parse_session(header.at("session").get<std::string>());
    meta.transition = parse_transition(header.at("transition").get<std::string>());
    meta.standard_montage = header.at("montage").get<std::string>() == "standard_11";
    fs = header.at("fs").get<double>();
    samples = header.at("samples").get<std::int64_t>();
    for (const auto& ch : header.at("channels"))
      channels.push_back({ch.at("name").get<std::string>(),
                          parse_channel_kind(ch.at("kind").get<std::string>()),
                          ch.at("unit").get<std::string>()});
  } catch (const json::exception& e) {
    raise(ErrorKind::Io,
          "bundle '" + stem.string() + "': header schema violation: " + e.what());
  }

  const std::string payload = read_file(stem.string() + ".f32");
  require(payload.size() == channels.size() * static_cast<std::size_t>(samples) * 4,
          ErrorKind::Io,
          "bundle '" + stem.string() + "': payload is " +
              std::to_string(payload.size()) + " bytes, header expects " +
              std::to_string(channels.size() * static_cast<std::size_t>(samples) * 4));

  Eigen::MatrixXd data(static_cast<Eigen::Index>(channels.size()), samples);
  std::size_t at = 0;
  for (Eigen::Index c = 0; c < data.rows(); ++c) {
    for (Eigen::Index s = 0; s < samples; ++s) {
      float v = 0;
      std::memcpy(&v, payload.data() + at, 4);
      at += 4;
      data(c, s) = double(v);
    }
  }

  std::vector<Event> events;
  std::istringstream in(read_file(stem.string() + ".events"));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string sample_str, label_str, transition_str;
    const bool ok = bool(std::getline(fields, sample_str, ',')) &&
                    bool(std::getline(fields, label_str, ',')) &&
                    bool(std::getline(fields, transition_str));
    require(ok, ErrorKind::Io,
            "bundle '" + stem.string() + "': bad event line " +
                std::to_string(line_no));
    Event ev;
    try {
      ev.sample = std::stoll(sample_str);
    } catch (...) {
      raise(ErrorKind::Io, "bundle '" + stem.string() + "': bad event sample '" +
                               sample_str + "'");
    }
    ev.label = parse_event_label(label_str);
    ev.transition = parse_transition(transition_str);
    events.push_back(ev);
  }

  RecordingOptions opts;
  opts.validate_montage = meta.standard_montage;
  return Bundle{Recording(id, std::move(channels), fs, std::move(data),
                          std::move(events), opts),
                meta};
}

void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  json doc;
  doc["command"] = m.command;
  doc["version"] = m.version.empty() ? std::string(kVersion) : m.version;
  doc["seed"] = m.seed;
  doc["config"] = json::object();
  for (const auto& [key, value] : m.config.entries()) doc["config"][key] = value;
  {
    std::ostringstream hash;
    hash << "fnv1a64:" << std::hex << fnv1a64(m.config.canonical_text());
    doc["config_hash"] = hash.str();
  }
  doc["inputs"] = json::object();
  for (const auto& input : m.inputs)
    doc["inputs"][input.string()] = hash_file(input);
  doc["outputs"] = m.outputs;
  atomic_write(path, doc.dump(2) + "\n");
}

}  // namespace bci::io
