# Seeded synthetic worlds
