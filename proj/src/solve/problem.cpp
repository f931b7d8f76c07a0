#include "ums/solve/problem.hpp"

#include "ums/core/error.hpp"

namespace ums {

Eigen::VectorXd rotation_to_vector(const Rotation& r) {
  Eigen::VectorXd v(4);
  v = r.wxyz();
  return v;
}

Rotation rotation_from_vector(const Eigen::VectorXd& v) {
  return Rotation(v(0), v(1), v(2), v(3));
}

Eigen::VectorXd manifold_plus(ManifoldKind kind, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& delta) {
  switch (kind) {
    case ManifoldKind::Rotation: {
      const Rotation updated = Rotation::exp(Vec3(delta)) * rotation_from_vector(x);
      return rotation_to_vector(updated);
    }
    case ManifoldKind::InverseDepth: {
      Eigen::VectorXd out = x + delta;
      out(0) = std::max(out(0), 1e-8);
      return out;
    }
    case ManifoldKind::Euclidean:
      return x + delta;
  }
  return x;
}

Eigen::VectorXd manifold_minus(ManifoldKind kind, const Eigen::VectorXd& x,
                               const Eigen::VectorXd& x0) {
  if (kind == ManifoldKind::Rotation) {
    const Rotation delta = rotation_from_vector(x) * rotation_from_vector(x0).inverse();
    Eigen::VectorXd out(3);
    out = delta.log();
    return out;
  }
  return x - x0;
}

ParameterBlock& Problem::add_block(ParameterBlock block) {
  if (block.kind == ManifoldKind::Rotation && block.value.size() != 4) {
    raise(ErrorCode::StructureError, "rotation block must hold 4 values");
  }
  const int id = block.id;
  auto [it, inserted] = blocks_.emplace(id, std::move(block));
  if (!inserted) {
    raise(ErrorCode::StructureError, "duplicate block id " + std::to_string(id));
  }
  return it->second;
}

ParameterBlock& Problem::block(int id) {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) {
    raise(ErrorCode::StructureError, "unknown block id " + std::to_string(id));
  }
  return it->second;
}

const ParameterBlock& Problem::block(int id) const {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) {
    raise(ErrorCode::StructureError, "unknown block id " + std::to_string(id));
  }
  return it->second;
}

}  // namespace ums
