#ifndef AMS_AMS_HPP
#define AMS_AMS_HPP

/** Umbrella header for the full library: dense linear algebra, manifold
 * embedding, the semantic-feature-expanding autoencoder, prototype
 * synthesis, recognition, file formats, and pipeline orchestration. */

#include "ams/autoencoder.hpp"
#include "ams/dataset.hpp"
#include "ams/errors.hpp"
#include "ams/evd.hpp"
#include "ams/io.hpp"
#include "ams/manifold.hpp"
#include "ams/matrix.hpp"
#include "ams/pipeline.hpp"
#include "ams/projection.hpp"
#include "ams/prototypes.hpp"
#include "ams/rng.hpp"
#include "ams/solve.hpp"
#include "ams/synthetic.hpp"

namespace ams {

inline constexpr const char *k_version = "1.0.0";

} // namespace ams

#endif // AMS_AMS_HPP
