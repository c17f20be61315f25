#include <cstring>

#include "fdm/live_service.hpp"

namespace fdm {

namespace {

template <typename T>
void put(std::string& out, T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  out.append(bytes, sizeof(T));
}

template <typename T>
T get(const std::string& in, std::size_t& offset) {
  T value;
  std::memcpy(&value, in.data() + offset, sizeof(T));
  offset += sizeof(T);
  return value;
}

constexpr std::size_t kFrameHeader = sizeof(std::uint64_t) + sizeof(std::uint16_t);

}  // namespace

std::string encode_frame(const FramePayload& frame) {
  std::string out;
  out.reserve(kFrameHeader + 4 * (frame.reduced.size() + frame.positions.size()));
  put(out, frame.frame_id);
  put(out, frame.component);
  for (float x : frame.reduced) put(out, x);
  for (float x : frame.positions) put(out, x);
  return out;
}

FramePayload decode_frame(const std::string& bytes, std::size_t surface_vertices) {
  const std::size_t positions = 3 * surface_vertices;
  if (bytes.size() < kFrameHeader + 4 * positions || (bytes.size() - kFrameHeader) % 4 != 0)
    throw ProtocolError("frame has " + std::to_string(bytes.size()) + " bytes, inconsistent with " +
                        std::to_string(surface_vertices) + " surface vertices");
  FramePayload f;
  std::size_t offset = 0;
  f.frame_id = get<std::uint64_t>(bytes, offset);
  f.component = get<std::uint16_t>(bytes, offset);
  const std::size_t m = (bytes.size() - kFrameHeader) / 4 - positions;
  f.reduced.resize(m);
  for (auto& x : f.reduced) x = get<float>(bytes, offset);
  f.positions.resize(positions);
  for (auto& x : f.positions) x = get<float>(bytes, offset);
  return f;
}

std::string event_name(EventKind kind) {
  switch (kind) {
    case EventKind::assign: return "assign";
    case EventKind::move: return "move";
    case EventKind::release: return "release";
  }
  return "?";
}

ClientMessage parse_client_message(const std::string& text, Index num_vertices) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string())
    throw ProtocolError("message must be an object with a string \"type\"");
  const std::string type = j["type"];
  ClientMessage msg;
  if (type == "ping") {
    msg.ping = true;
    if (j.contains("id")) msg.echo = j["id"];
    return msg;
  }
  if (type == "assign") {
    msg.event.kind = EventKind::assign;
  } else if (type == "move") {
    msg.event.kind = EventKind::move;
  } else if (type == "release") {
    msg.event.kind = EventKind::release;
  } else {
    throw ProtocolError("unknown message type \"" + type + "\"");
  }
  if (!j.contains("vertex") || !j["vertex"].is_number_unsigned())
    throw ProtocolError(type + " needs an unsigned integer \"vertex\"");
  const auto vertex = j["vertex"].get<std::uint64_t>();
  if (vertex >= static_cast<std::uint64_t>(num_vertices))
    throw ProtocolError("vertex " + std::to_string(vertex) + " out of range");
  msg.event.vertex = static_cast<Index>(vertex);
  if (j.contains("target") && !j["target"].is_null()) {
    const auto& t = j["target"];
    if (!t.is_array() || t.size() != 3 || !t[0].is_number() || !t[1].is_number() || !t[2].is_number())
      throw ProtocolError("\"target\" must be an array of 3 numbers");
    msg.event.target = Vec3(t[0].get<double>(), t[1].get<double>(), t[2].get<double>());
    if (!msg.event.target->allFinite()) throw ProtocolError("\"target\" must be finite");
  } else if (msg.event.kind == EventKind::move) {
    throw ProtocolError("move needs a \"target\"");
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "type" && key != "vertex" && key != "target") throw ProtocolError("unknown field \"" + key + "\"");
  }
  return msg;
}

}  // namespace fdm
