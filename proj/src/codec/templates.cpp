// Copyright 2026 The avalign Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "codec/codec.hpp"

namespace avalign {

namespace {

const char* const kArigTemplates[] = {
    "Given the audio and image pair, identify the object category of the audio. Now, provide a bounding box for that object in the image. The answer should be in the form [<obj>,xLeft,yTop,xRight,yBottom]. <obj> represents the object category. xLeft,yTop are coordinates of the top-left corner and xRight,yBottom are coordinates of the bottom-right corner of the bounding box. The coordinates should be within the range 0 to 1.",
    "From the given audio and image pair first identify the object category of the audio. Then localize the corresponding object in the image by providing a bounding box. The answer should be in the form [<obj>,xLeft,yTop,xRight,yBottom]. <obj> represents the object category. xLeft,yTop are coordinates of the top-left corner and xRight,yBottom are coordinates of the bottom-right corner of the bounding box. The coordinates should be within the range 0 to 1.",
    "Given the audio and image pair, identify the object category of the audio. Now, localize the object in the image by providing a bounding box. The answer should be in the form [<obj>,xLeft,yTop,xRight,yBottom]. <obj> represents the object category. xLeft,yTop are coordinates of the top-left corner and xRight,yBottom are coordinates of the bottom-right corner of the bounding box. The coordinates should be within the range 0 to 1.",
    "Considering the audio and image pair, determine the object class of the audio. Next, localize the same object in the image by providing a bounding box. The answer should be in the form [<obj>,xLeft,yTop,xRight,yBottom]. <obj> represents the class of the object. xLeft,yTop are coordinates of the top-left corner and xRight,yBottom are coordinates of the bottom-right corner of the bounding box. The coordinates should be within the range 0 to 1.",
    "Considering the audio and image pair, recognize the object category of the audio. Subsequently, draw a bounding box around that object shown in the image. The answer should be in the form [<obj>,xLeft,yTop,xRight,yBottom]. <obj> represents the category of the object. xLeft,yTop are coordinates of the top-left corner and xRight,yBottom are coordinates of the bottom-right corner of the bounding box. The coordinates should be within the range 0 to 1.",
    "Considering the audio and image pair, recognize the object category of the audio. Next, draw a bounding box around that object in the image. The answer should be in the form [<obj>,xLeft,yTop,xRight,yBottom]. <obj> represents the category of the object. xLeft,yTop are coordinates of the top-left corner and xRight,yBottom are coordinates of the bottom-right corner of the bounding box. Ensure the bounding box is within the range 0 to 1.",
};

const char* const kIgatlTemplates[] = {
    "Identify the object category from the image. Now, find the time duration in the audio where that object is making the sound. The output should be in the form (tStart,tEnd) where tStart and tEnd are the start and end times respectively. tStart is less than tEnd. The minimum value of tStart is 0. The maximum value of tEnd is 30.",
    "Given the image, identify the object category. Next, output the time window in the audio where that object is making the sound. The output should be in the form (tStart,tEnd) where tStart and tEnd are the start and end times respectively. tStart is less than tEnd. The minimum value of tStart is 0. The maximum value of tEnd is 30.",
    "Which object do you see in the image? Please find the time window in the audio where that object is making the sound. The output should be in the form (tStart,tEnd) where tStart and tEnd are the start and end times respectively. tStart is less than tEnd. The minimum value of tStart is 0. The maximum value of tEnd is 30.",
    "Recognise the object category from the image. Now, indicate the time duration in the audio where that object is making the sound. The output should be in the form (tStart,tEnd) where tStart and tEnd are the start and end times respectively. tStart is less than tEnd. The minimum value of tStart is 0. The maximum value of tEnd is 30.",
    "What is the category of the object that you see in the image? Now, indicate the temporal duration in the audio where that object is making the sound. The output should be in the form (tStart,tEnd) where tStart and tEnd are the start and end times respectively. tStart is less than tEnd. The minimum value of tStart is 0. The maximum value of tEnd is 30.",
};

const char* const kAvfactTemplates[] = {
    "Does the object inside the bounding box <placeholder_bbox> of the image produce the same sound as in the given audio? Answer in True or False.",
    "Given the image, does the object inside the bounding box <placeholder_bbox> produce the same sound as in the given audio? Answer in True or False.",
    "The object inside the bounding box <placeholder_bbox> of the image produces the same sound as in the given audio. True or False?",
    "From the audio-image pair, verify if the object inside the bounding box <placeholder_bbox> produces the same sound as present in the given audio. Answer in True or False.",
    "The object in the given audio between time duration <placeholder_time> is present in the image. True or False?",
    "Listen to the audio in the time window <placeholder_time>. Does this object exist in the image? Answer in True or False.",
    "Listen to the audio in the time window <placeholder_time>. Verify if the same object is present in the image. True or False?",
    "The time segment <placeholder_time> contains the object as present in the image. True or False?",
    "Listen to the audio in the time window <placeholder_time>. The same object is within the bounding box <placeholder_bbox> in the image. True or False?",
    "Does the object inside the bounding box <placeholder_bbox> of the image produce the same sound as within the time duration <placeholder_time> in the given audio? Answer in True or False.",
    "The object inside the bounding box <placeholder_bbox> of the image produces the same sound as in the time segment <placeholder_time> of the audio. True or False?",
    "The time segment <placeholder_time> contains the object in the bounding box <placeholder_bbox> of the image. True or False?",
    "Here is an audio-image pair. Does the given audio correspond to the object shown in the image? Answer in True or False.",
    "Does the given audio correspond to the object shown in the image? Answer in True or False.",
    "Does the given audio associate with the object shown in the image? Answer in True or False.",
    "Here is an audio-image pair. Does the given image associate with the object sounding in the audio? Answer in True or False.",
};

template <std::size_t N>
std::vector<InstructionTemplate> build(const char* const (&texts)[N]) {
  std::vector<InstructionTemplate> v;
  for (const char* text : texts) v.emplace_back(text);
  return v;
}

}  // namespace

const std::vector<InstructionTemplate>& builtin_templates(TaskFamily family) {
  static const std::vector<InstructionTemplate> arig = build(kArigTemplates);
  static const std::vector<InstructionTemplate> igatl = build(kIgatlTemplates);
  static const std::vector<InstructionTemplate> avfact = build(kAvfactTemplates);
  switch (family) {
    case TaskFamily::kArig: return arig;
    case TaskFamily::kIgatl: return igatl;
    case TaskFamily::kAvfact: break;
  }
  return avfact;
}

}  // namespace avalign
