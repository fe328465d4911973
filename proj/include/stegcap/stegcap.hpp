#pragma once

// Umbrella header.

#include "stegcap/corpus.hpp"
#include "stegcap/error.hpp"
#include "stegcap/models.hpp"
#include "stegcap/random.hpp"
#include "stegcap/stego_codec.hpp"
#include "stegcap/sweeper.hpp"
#include "stegcap/weight_store.hpp"
