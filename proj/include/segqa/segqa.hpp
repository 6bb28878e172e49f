#ifndef SEGQA_SEGQA_HPP
#define SEGQA_SEGQA_HPP

#include "segqa/error.hpp"
#include "segqa/grid.hpp"
#include "segqa/nifti.hpp"
#include "segqa/affine_io.hpp"
#include "segqa/manifest.hpp"
#include "segqa/morphometry.hpp"
#include "segqa/registration_features.hpp"
#include "segqa/features.hpp"
#include "segqa/feature_csv.hpp"
#include "segqa/regressor.hpp"
#include "segqa/stats.hpp"
#include "segqa/phantom.hpp"
#include "segqa/svg.hpp"
#include "segqa/commands.hpp"

#endif  // SEGQA_SEGQA_HPP
