#pragma once

#include <stdexcept>
#include <string>

namespace cate_ebm {

// Two broad families drive the CLI exit codes: input errors (bad shapes,
// bad files, bad config) exit 2, numeric failures exit 3.
class input_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class numeric_error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class dimension_error : public input_error {
public:
  using input_error::input_error;
};

class invalid_dimension_error : public input_error {
public:
  using input_error::input_error;
};

class too_few_samples_error : public input_error {
public:
  using input_error::input_error;
};

class degenerate_column_error : public numeric_error {
public:
  degenerate_column_error(std::size_t column, const std::string& what)
      : numeric_error(what), column_(column) {}
  std::size_t column() const noexcept { return column_; }

private:
  std::size_t column_;
};

class training_diverged_error : public numeric_error {
public:
  training_diverged_error(long last_finite_epoch, const std::string& what)
      : numeric_error(what), last_finite_epoch_(last_finite_epoch) {}
  // -1 when no epoch completed with a finite loss.
  long last_finite_epoch() const noexcept { return last_finite_epoch_; }

private:
  long last_finite_epoch_;
};

class ill_conditioned_error : public numeric_error {
public:
  using numeric_error::numeric_error;
};

class untrained_model_error : public input_error {
public:
  using input_error::input_error;
};

class empty_arm_error : public numeric_error {
public:
  using numeric_error::numeric_error;
};

// Model file errors.
class model_file_error : public input_error {
public:
  using input_error::input_error;
};
class version_mismatch_error : public model_file_error {
public:
  using model_file_error::model_file_error;
};
class checksum_error : public model_file_error {
public:
  using model_file_error::model_file_error;
};
class truncated_file_error : public model_file_error {
public:
  using model_file_error::model_file_error;
};

class csv_error : public input_error {
public:
  using input_error::input_error;
};

class config_error : public input_error {
public:
  using input_error::input_error;
};

} // namespace cate_ebm
