#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include "temcgl/graph.hpp"

namespace temcgl {

/// One step of the class-incremental sequence.
struct TaskSpec {
  TaskId task_id = 0;
  std::vector<ClassId> classes;
  std::vector<NodeId> train;
  std::vector<NodeId> valid;
  std::vector<NodeId> test;

  bool has_class(ClassId c) const { return std::find(classes.begin(), classes.end(), c) != classes.end(); }
};

/// Splits classes 0..C-1 in ascending order into tasks of `classes_per_task`
/// classes; the last task takes the remainder.
inline std::vector<TaskSpec> build_task_sequence(const Graph& g, std::size_t classes_per_task) {
  const std::size_t c = g.num_classes();
  if (classes_per_task == 0) throw std::invalid_argument("build_task_sequence: classes_per_task must be >= 1");
  if (classes_per_task > c) {
    throw std::invalid_argument("build_task_sequence: classes_per_task (" + std::to_string(classes_per_task) +
                                ") exceeds number of classes (" + std::to_string(c) + ")");
  }
  const std::size_t num_tasks = (c + classes_per_task - 1) / classes_per_task;
  std::vector<TaskSpec> tasks(num_tasks);
  std::vector<std::size_t> task_of_class(c);
  for (std::size_t t = 0; t < num_tasks; ++t) {
    tasks[t].task_id = static_cast<TaskId>(t);
    for (std::size_t k = t * classes_per_task; k < std::min(c, (t + 1) * classes_per_task); ++k) {
      tasks[t].classes.push_back(static_cast<ClassId>(k));
      task_of_class[k] = t;
    }
  }
  for (NodeId v = 0; v < g.num_nodes(); ++v) {
    TaskSpec& t = tasks[task_of_class[g.label(v)]];
    switch (g.split(v)) {
      case Split::kTrain: t.train.push_back(v); break;
      case Split::kValid: t.valid.push_back(v); break;
      case Split::kTest: t.test.push_back(v); break;
    }
  }
  return tasks;
}

}  // namespace temcgl
