#pragma once

#include "sleepgrant/channel.hpp"
#include "sleepgrant/config.hpp"
#include "sleepgrant/engine.hpp"
#include "sleepgrant/error.hpp"
#include "sleepgrant/io.hpp"
#include "sleepgrant/policies.hpp"
#include "sleepgrant/qos.hpp"
#include "sleepgrant/random.hpp"
#include "sleepgrant/traffic.hpp"
