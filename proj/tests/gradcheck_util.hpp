#pragma once

#include "t2v/gradcheck.hpp"
