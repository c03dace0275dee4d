#pragma once

// Bundled label catalogs: the 90 Reuters-21578 ApteMod topics and the Web of
// Science domain/area hierarchy. The JSON copies live under data/catalogs/.

#include <array>
#include <cstddef>
#include <string_view>

namespace sstgen::catalogs {

inline constexpr std::array<std::string_view, 90> kReutersTopics = {
    "acq", "alum", "barley", "bop", "carcass", "castor-oil",
    "cocoa", "coconut", "coconut-oil", "coffee", "copper", "copra-cake",
    "corn", "cotton", "cotton-oil", "cpi", "cpu", "crude",
    "dfl", "dlr", "dmk", "earn", "fuel", "gas",
    "gnp", "gold", "grain", "groundnut", "groundnut-oil", "heat",
    "hog", "housing", "income", "instal-debt", "interest", "ipi",
    "iron-steel", "jet", "jobs", "l-cattle", "lead", "lei",
    "lin-oil", "livestock", "lumber", "meal-feed", "money-fx", "money-supply",
    "naphtha", "nat-gas", "nickel", "nkr", "nzdlr", "oat",
    "oilseed", "orange", "palladium", "palm-oil", "palmkernel", "pet-chem",
    "platinum", "potato", "propane", "rand", "rape-oil", "rapeseed",
    "reserves", "retail", "rice", "rubber", "rye", "ship",
    "silver", "sorghum", "soy-meal", "soy-oil", "soybean", "strategic-metal",
    "sugar", "sun-meal", "sun-oil", "sunseed", "tea", "tin",
    "trade", "veg-oil", "wheat", "wpi", "yen", "zinc",
};

struct WosDomain {
  std::string_view name;
  const std::string_view* areas;
  std::size_t area_count;
};

inline constexpr std::string_view kWosCSAreas[] = {
    "Algorithm design",
    "Bioinformatics",
    "Computer graphics",
    "Computer programming",
    "Computer vision",
    "Cryptography",
    "Data structures",
    "Distributed computing",
    "Image processing",
    "Machine learning",
    "Operating systems",
    "Parallel computing",
    "Relational databases",
    "Software engineering",
    "Structured Storage",
    "Symbolic computation",
    "network security",
};

inline constexpr std::string_view kWosCivilAreas[] = {
    "Ambient Intelligence",
    "Bamboo as a Building Material",
    "Construction Management",
    "Geotextile",
    "Green Building",
    "Highway Network System",
    "Nano Concrete",
    "Rainwater Harvesting",
    "Remote Sensing",
    "Smart Material",
    "Solar Energy",
    "Stealth Technology",
    "Suspension Bridge",
    "Transparent Concrete",
    "Underwater Windmill",
    "Water Pollution",
};

inline constexpr std::string_view kWosECEAreas[] = {
    "Analog signal processing",
    "Control engineering",
    "Digital control",
    "Electric motor",
    "Electrical circuits",
    "Electrical generator",
    "Electrical network",
    "Electricity",
    "Lorentz force law",
    "Microcontroller",
    "Operational amplifier",
    "PID controller",
    "Satellite radio",
    "Signal-flow graph",
    "Single-phase electric power",
    "State space representation",
    "System identification",
    "Voltage law",
};

inline constexpr std::string_view kWosMAEAreas[] = {
    "Fluid mechanics",
    "Hydraulics",
    "Internal combustion engine",
    "Machine design",
    "Manufacturing engineering",
    "Materials Engineering",
    "Strength of materials",
    "Thermodynamics",
    "computer-aided design",
};

inline constexpr std::string_view kWosMedicalAreas[] = {
    "Addiction",
    "Allergies",
    "Alzheimer's Disease",
    "Ankylosing Spondylitis",
    "Anxiety",
    "Asthma",
    "Atopic Dermatitis",
    "Atrial Fibrillation",
    "Autism",
    "Bipolar Disorder",
    "Birth Control",
    "Cancer",
    "Children's Health",
    "Crohn's Disease",
    "Dementia",
    "Depression",
    "Diabetes",
    "Digestive Health",
    "Emergency Contraception",
    "Fungal Infection",
    "HIV/AIDS",
    "Headache",
    "Healthy Sleep",
    "Heart Disease",
    "Hepatitis C",
    "Hereditary Angioedema",
    "Hypothyroidism",
    "Idiopathic Pulmonary Fibrosis",
    "Irritable Bowel Syndrome",
    "Kidney Health",
    "Low Testosterone",
    "Lymphoma",
    "Medicare",
    "Menopause",
    "Mental Health",
    "Migraine",
    "Multiple Sclerosis",
    "Myelofibrosis",
    "Osteoarthritis",
    "Osteoporosis",
    "Outdoor Health",
    "Overactive Bladder",
    "Parenting",
    "Parkinson's Disease",
    "Polycythemia Vera",
    "Psoriasis",
    "Psoriatic Arthritis",
    "Rheumatoid Arthritis",
    "Schizophrenia",
    "Senior Health",
    "Skin Care",
    "Smoking Cessation",
    "Sports Injuries",
    "Sprains and Strains",
    "Stress Management",
    "Weight Loss",
};

inline constexpr std::string_view kWosPsychologyAreas[] = {
    "Antisocial personality disorder",
    "Attention",
    "Borderline personality disorder",
    "Child abuse",
    "Depression",
    "Eating disorders",
    "False memories",
    "Gender roles",
    "Leadership",
    "Media violence",
    "Nonverbal communication",
    "Person perception",
    "Prejudice",
    "Prenatal development",
    "Problem-solving",
    "Prosocial behavior",
    "Schizophrenia",
    "Seasonal affective disorder",
    "Social cognition",
};

inline constexpr std::string_view kWosBiochemistryAreas[] = {
    "Cell biology",
    "DNA/RNA sequencing",
    "Enzymology",
    "Genetics",
    "Human Metabolism",
    "Immunology",
    "Molecular biology",
    "Northern blotting",
    "Polymerase chain reaction",
    "Southern blotting",
};

inline constexpr std::array<WosDomain, 7> kWosDomains = {{
    {"CS", kWosCSAreas, 17},
    {"Civil", kWosCivilAreas, 16},
    {"ECE", kWosECEAreas, 18},
    {"MAE", kWosMAEAreas, 9},
    {"Medical", kWosMedicalAreas, 56},
    {"Psychology", kWosPsychologyAreas, 19},
    {"Biochemistry", kWosBiochemistryAreas, 10},
}};

}  // namespace sstgen::catalogs
