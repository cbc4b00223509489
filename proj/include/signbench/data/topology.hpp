#pragma once

#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "signbench/core/error.hpp"

namespace signbench {

using EdgeList = std::vector<std::pair<int, int>>;

// Skeleton connectivity per articulator, with joint indices local to each
// group. Shipped as a versioned JSON asset; builtin() mirrors the asset.
struct SkeletonTopology {
  int version = 1;
  EdgeList face;        // 128 joints
  EdgeList body;        // 33 joints
  EdgeList left_hand;   // 21 joints
  EdgeList right_hand;  // 21 joints

  static SkeletonTopology builtin() {
    SkeletonTopology t;
    // Hand: wrist, thumb(1-4), index(5-8), middle(9-12), ring(13-16), pinky(17-20).
    EdgeList hand = {{0, 1},   {1, 2},   {2, 3},   {3, 4},  {0, 5},  {5, 6},   {6, 7},
                     {7, 8},   {5, 9},   {9, 10},  {10, 11}, {11, 12}, {9, 13},  {13, 14},
                     {14, 15}, {15, 16}, {13, 17}, {17, 18}, {18, 19}, {19, 20}, {0, 17}};
    t.left_hand = hand;
    t.right_hand = hand;
    // Body: 33 pose landmarks (nose/eyes/ears 0-10, arms 11-22, legs 23-32).
    t.body = {{0, 1},   {1, 2},   {2, 3},   {3, 7},   {0, 4},   {4, 5},   {5, 6},   {6, 8},
              {9, 10},  {11, 12}, {11, 13}, {13, 15}, {15, 17}, {15, 19}, {15, 21}, {17, 19},
              {12, 14}, {14, 16}, {16, 18}, {16, 20}, {16, 22}, {18, 20}, {11, 23}, {12, 24},
              {23, 24}, {23, 25}, {24, 26}, {25, 27}, {26, 28}, {27, 29}, {28, 30}, {29, 31},
              {30, 32}, {27, 31}, {28, 32}};
    // Face: 128 joints laid out as rings and chains.
    //   0-35   jaw/oval ring, 36-51 left eye ring, 52-67 right eye ring,
    //   68-87  outer lips ring, 88-107 inner lips ring,
    //   108-117 left brow chain, 118-127 right brow chain.
    auto ring = [](EdgeList& edges, int begin, int count) {
      for (int i = 0; i < count; ++i)
        edges.emplace_back(begin + i, begin + (i + 1) % count);
    };
    auto chain = [](EdgeList& edges, int begin, int count) {
      for (int i = 0; i + 1 < count; ++i) edges.emplace_back(begin + i, begin + i + 1);
    };
    ring(t.face, 0, 36);
    ring(t.face, 36, 16);
    ring(t.face, 52, 16);
    ring(t.face, 68, 20);
    ring(t.face, 88, 20);
    chain(t.face, 108, 10);
    chain(t.face, 118, 10);
    // attach rings/chains to the oval so each articulator graph is connected
    t.face.emplace_back(4, 36);
    t.face.emplace_back(31, 52);
    t.face.emplace_back(17, 68);
    t.face.emplace_back(68, 88);
    t.face.emplace_back(8, 108);
    t.face.emplace_back(27, 118);
    return t;
  }

  static SkeletonTopology load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open skeleton topology: " + path);
    nlohmann::json j;
    try {
      is >> j;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("invalid topology JSON in " + path + ": " + e.what());
    }
    SkeletonTopology t;
    t.version = j.value("version", 1);
    auto read_edges = [&](const char* key) {
      EdgeList edges;
      if (!j.contains(key)) throw FormatError("topology missing '" + std::string(key) + "'");
      for (const auto& e : j[key]) edges.emplace_back(e[0].get<int>(), e[1].get<int>());
      return edges;
    };
    t.face = read_edges("face");
    t.body = read_edges("body");
    t.left_hand = read_edges("left_hand");
    t.right_hand = read_edges("right_hand");
    return t;
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write skeleton topology: " + path);
    auto dump = [&os](const char* name, const EdgeList& edges, bool last) {
      os << "  \"" << name << "\": [";
      for (size_t i = 0; i < edges.size(); ++i)
        os << (i ? "," : "") << "[" << edges[i].first << "," << edges[i].second << "]";
      os << "]" << (last ? "" : ",") << "\n";
    };
    os << "{\n  \"version\": " << version << ",\n";
    dump("face", face, false);
    dump("body", body, false);
    dump("left_hand", left_hand, false);
    dump("right_hand", right_hand, true);
    os << "}\n";
  }
};

}  // namespace signbench
