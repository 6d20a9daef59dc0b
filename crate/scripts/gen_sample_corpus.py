#!/usr/bin/env python3
"""Regenerate data/sample/recipes.jsonl.

The sample corpus is synthetic. Class rosters are invented for the sample
and are not canonical for any published dataset:

  cuisines: American, Asian, Indian, Italian, Mediterranean, Mexican
  dietary:  Vegan, Vegetarian, Gluten-free, Dairy-free, Low fat
  course:   Main Dish, Side Dish, Appetizer, Dessert, Breakfast

Dietary labels are derived from ingredient content so the classifiers have
real signal. Each recipe is tagged with its most specific applicable dietary
class (first match in the order above); about one in five also lists a
second applicable class. Output is deterministic for a fixed seed.
"""

import json
import random
import sys
from pathlib import Path

SEED = 20240607
N_RECIPES = 300

# (raw line variants, flags). Flags: m=meat/fish, a=animal product,
# g=gluten, d=dairy, f=high fat.
ING = {
    "garlic": (["3 cloves garlic, minced", "2 garlic cloves, crushed", "1 tbsp minced garlic"], ""),
    "onion": (["1 large onion, diced", "1 onion, chopped", "1/2 cup chopped onions"], ""),
    "salt": (["1 tsp salt", "salt to taste", "1/2 teaspoon kosher salt"], ""),
    "pepper": (["1/2 tsp ground black pepper", "black pepper, ground", "1/4 teaspoon ground black pepper"], ""),
    "olive oil": (["2 tbsp olive oil", "1/4 cup extra virgin olive oil", "3 tablespoons olive oil"], ""),
    "butter": (["2 tbsp butter", "1/2 cup unsalted butter (softened)", "4 tablespoons butter, melted"], "adf"),
    "basil": (["1/4 cup basil, chopped", "1/2 cup basil, torn", "2 tbsp fresh basil (torn)", "1 cup basil, packed"], ""),
    "oregano": (["1 tsp dried oregano", "1 teaspoon oregano"], ""),
    "tomatoes": (["2 tomatoes, diced", "1 (14 oz) can diced tomatoes", "3 ripe tomatoes, chopped"], ""),
    "parmesan": (["1/2 cup grated parmesan cheese", "1/4 cup parmesan cheese (freshly grated)"], "adf"),
    "mozzarella": (["8 oz mozzarella cheese, sliced", "1 cup shredded mozzarella cheese"], "adf"),
    "spaghetti": (["1 lb spaghetti", "12 oz spaghetti noodles"], "g"),
    "penne": (["1 lb penne pasta", "8 oz penne pasta, uncooked"], "g"),
    "cumin": (["1 tsp ground cumin", "2 teaspoons cumin"], ""),
    "chili powder": (["1 tbsp chili powder", "2 tsp chili powder"], ""),
    "jalapeno": (["1 jalapeno pepper, seeded and minced", "2 jalapeno peppers, sliced"], ""),
    "cilantro": (["1/4 cup chopped fresh cilantro", "1/2 cup cilantro leaves"], ""),
    "lime": (["1 lime, juiced", "2 tbsp lime juice"], ""),
    "black beans": (["1 (15 oz) can black beans, rinsed", "2 cups black beans"], ""),
    "corn tortillas": (["8 corn tortillas", "12 corn tortillas, warmed"], ""),
    "flour tortillas": (["6 flour tortillas", "4 large flour tortillas"], "g"),
    "avocado": (["1 avocado, diced", "2 ripe avocados, mashed"], ""),
    "soy sauce": (["3 tbsp soy sauce", "1/4 cup soy sauce (low sodium)"], "g"),
    "ginger": (["1 tbsp grated fresh ginger", "1 inch ginger, minced", "1 teaspoon ground ginger"], ""),
    "sesame oil": (["1 tsp sesame oil", "2 teaspoons toasted sesame oil"], ""),
    "rice": (["2 cups cooked rice", "1 cup jasmine rice", "1 1/2 cups long grain rice"], ""),
    "scallions": (["3 scallions, sliced", "4 green onions, chopped"], ""),
    "rice vinegar": (["2 tbsp rice vinegar", "1 tablespoon rice vinegar"], ""),
    "tofu": (["14 oz firm tofu, cubed", "1 package extra firm tofu (drained)"], ""),
    "garam masala": (["2 tsp garam masala", "1 tablespoon garam masala"], ""),
    "turmeric": (["1 tsp ground turmeric", "1/2 teaspoon turmeric"], ""),
    "coconut milk": (["1 (14 oz) can coconut milk", "1 cup coconut milk"], ""),
    "lentils": (["1 cup red lentils, rinsed", "2 cups lentils"], ""),
    "chickpeas": (["1 (15 oz) can chickpeas, drained", "2 cups cooked chickpeas"], ""),
    "bacon": (["6 slices bacon, cooked and crumbled", "4 strips bacon"], "maf"),
    "cheddar": (["1 cup shredded cheddar cheese", "8 oz sharp cheddar cheese, grated"], "adf"),
    "ground beef": (["1 lb ground beef", "1 1/2 pounds lean ground beef"], "maf"),
    "potatoes": (["4 potatoes, peeled and cubed", "2 lbs russet potatoes"], ""),
    "ketchup": (["1/4 cup ketchup", "2 tbsp ketchup"], ""),
    "brown sugar": (["2 tbsp brown sugar", "1/2 cup packed brown sugar"], ""),
    "feta": (["1/2 cup crumbled feta cheese", "4 oz feta cheese"], "adf"),
    "lemon": (["1 lemon, juiced", "2 tbsp lemon juice", "1 lemon (zested and juiced)"], ""),
    "cucumber": (["1 cucumber, diced", "1 english cucumber, sliced"], ""),
    "olives": (["1/2 cup kalamata olives, pitted", "1/4 cup black olives"], ""),
    "chicken": (["3 lb chicken, cut into pieces", "1 chicken (about 4 lb)"], "ma"),
    "chicken breast": (["2 chicken breasts, boneless", "1 lb chicken breast, cubed", "4 chicken breast halves"], "ma"),
    "chicken thighs": (["6 chicken thighs", "2 lbs chicken thighs, boneless"], "ma"),
    "shrimp": (["1 lb shrimp, peeled and deveined", "12 oz large shrimp"], "ma"),
    "salmon": (["4 salmon fillets", "1 lb salmon fillet, skin removed"], "ma"),
    "pork": (["2 lb pork shoulder, cubed", "1 lb ground pork"], "maf"),
    "eggs": (["2 eggs", "3 large eggs, beaten", "1 egg"], "a"),
    "milk": (["1 cup milk", "1/2 cup whole milk"], "ad"),
    "cream": (["1 cup heavy cream", "1/2 cup heavy whipping cream"], "adf"),
    "yogurt": (["1 cup plain yogurt", "1/2 cup greek yogurt"], "ad"),
    "flour": (["2 cups all-purpose flour, sifted", "1 cup all-purpose flour", "1 1/2 cups flour"], "g"),
    "sugar": (["1 cup sugar", "1/2 cup white sugar", "3/4 cup granulated sugar"], ""),
    "vanilla": (["1 tsp vanilla extract", "2 teaspoons vanilla extract"], ""),
    "baking powder": (["1 tsp baking powder", "2 teaspoons baking powder"], ""),
    "chocolate": (["1 cup semisweet chocolate chips", "4 oz dark chocolate, chopped"], "f"),
    "cinnamon": (["1 tsp ground cinnamon", "1/2 teaspoon cinnamon"], ""),
    "honey": (["2 tbsp honey", "1/4 cup honey"], "a"),
    "oats": (["2 cups rolled oats", "1 cup old-fashioned oats"], ""),
    "bread": (["4 slices bread", "1 loaf french bread, sliced"], "g"),
    "bananas": (["2 ripe bananas, mashed", "3 bananas"], ""),
    "berries": (["1 cup fresh blueberries", "1 cup mixed berries"], ""),
    "spinach": (["2 cups fresh spinach", "1 (10 oz) package frozen spinach, thawed"], ""),
    "bell pepper": (["1 red bell pepper, sliced", "1 green bell pepper, diced"], ""),
    "carrots": (["2 carrots, peeled and sliced", "1 cup shredded carrots"], ""),
    "broccoli": (["2 cups broccoli florets", "1 head broccoli, cut into florets"], ""),
    "zucchini": (["2 zucchini, sliced", "1 medium zucchini, diced"], ""),
    "mushrooms": (["8 oz mushrooms, sliced", "1 cup sliced mushrooms"], ""),
    "vegetable broth": (["2 cups vegetable broth", "4 cups vegetable stock"], ""),
    "chicken broth": (["2 cups chicken broth", "1 (14 oz) can chicken broth"], "ma"),
    "paprika": (["1 tsp paprika", "1/2 teaspoon smoked paprika"], ""),
    "parsley": (["2 tbsp chopped fresh parsley", "1/4 cup parsley, chopped"], ""),
    "mayonnaise": (["1/2 cup mayonnaise", "2 tbsp mayonnaise"], "af"),
}

CUISINE = {
    "Italian": ["basil", "oregano", "tomatoes", "parmesan", "mozzarella", "spaghetti", "penne", "olive oil", "garlic", "parsley", "mushrooms", "zucchini"],
    "Mexican": ["cumin", "chili powder", "jalapeno", "cilantro", "lime", "black beans", "corn tortillas", "flour tortillas", "avocado", "tomatoes", "onion", "bell pepper"],
    "Asian": ["soy sauce", "ginger", "sesame oil", "rice", "scallions", "rice vinegar", "tofu", "garlic", "broccoli", "carrots", "honey", "mushrooms"],
    "Indian": ["garam masala", "turmeric", "cumin", "ginger", "coconut milk", "lentils", "chickpeas", "onion", "yogurt", "cilantro", "rice", "spinach"],
    "American": ["butter", "bacon", "cheddar", "ground beef", "potatoes", "ketchup", "brown sugar", "onion", "mayonnaise", "milk", "paprika", "bread"],
    "Mediterranean": ["olive oil", "feta", "lemon", "cucumber", "chickpeas", "oregano", "olives", "tomatoes", "parsley", "yogurt", "garlic", "spinach"],
}

COURSE = {
    "Main Dish": ["chicken", "chicken breast", "chicken thighs", "shrimp", "salmon", "pork", "ground beef", "tofu"],
    "Side Dish": ["potatoes", "rice", "broccoli", "carrots", "zucchini", "spinach", "mushrooms"],
    "Appetizer": ["avocado", "cucumber", "bread", "mozzarella", "shrimp", "mayonnaise", "olives"],
    "Dessert": ["sugar", "flour", "vanilla", "baking powder", "chocolate", "cinnamon", "butter", "eggs"],
    "Breakfast": ["eggs", "milk", "oats", "bananas", "berries", "bread", "honey", "cinnamon"],
}

COMMON = ["salt", "pepper", "garlic", "onion"]

DISH_WORDS = {
    "Main Dish": ["Skillet", "Bake", "Stew", "Curry", "Stir Fry", "Roast", "Bowl"],
    "Side Dish": ["Medley", "Pilaf", "Saute", "Mash", "Slaw", "Roasted Vegetables"],
    "Appetizer": ["Bites", "Dip", "Crostini", "Skewers", "Salsa", "Cups"],
    "Dessert": ["Cake", "Cookies", "Bars", "Pudding", "Tart", "Crumble"],
    "Breakfast": ["Pancakes", "Scramble", "Muffins", "Oatmeal", "Toast", "Smoothie Bowl"],
}

DIET_ORDER = ["Vegan", "Vegetarian", "Gluten-free", "Dairy-free", "Low fat"]


def applicable_diets(keys):
    flags = "".join(ING[k][1] for k in keys)
    out = []
    if "a" not in flags:
        out.append("Vegan")
    if "m" not in flags:
        out.append("Vegetarian")
    if "g" not in flags:
        out.append("Gluten-free")
    if "d" not in flags:
        out.append("Dairy-free")
    if "f" not in flags:
        out.append("Low fat")
    return out


def dietary(keys, rng):
    applicable = applicable_diets(keys)
    if not applicable:
        return []
    out = [applicable[0]]
    if len(applicable) > 1 and rng.random() < 0.2:
        out.append(rng.choice(applicable[1:]))
    return out


def title_case(s):
    return " ".join(w[:1].upper() + w[1:] for w in s.split())


def make_recipe(rng):
    cuisines = [rng.choice(list(CUISINE))]
    if rng.random() < 0.12:
        second = rng.choice([c for c in CUISINE if c != cuisines[0]])
        cuisines.append(second)
    course = rng.choice(list(COURSE))

    keys = []
    for k in rng.sample(COURSE[course], k=rng.randint(2, 3)):
        keys.append(k)
    for c in cuisines:
        for k in rng.sample(CUISINE[c], k=rng.randint(3, 5)):
            if k not in keys:
                keys.append(k)
    if course != "Dessert":
        for k in COMMON:
            if rng.random() < 0.5 and k not in keys:
                keys.append(k)
    if course in ("Dessert", "Breakfast") and "sugar" not in keys and rng.random() < 0.6:
        keys.append("sugar")

    lines = [rng.choice(ING[k][0]) for k in keys]
    if rng.random() < 0.15:
        lines.append("water (as needed)")
    hero = [k for k in keys if k not in COMMON][:2]
    title = "{} {} {}".format(
        title_case(cuisines[0] if rng.random() < 0.3 else hero[0]),
        title_case(hero[1] if len(hero) > 1 else hero[0]),
        rng.choice(DISH_WORDS[course]),
    )
    labels = {"cuisines": cuisines, "course": [course]}
    diet = dietary(keys, rng)
    if diet:
        labels["dietary"] = diet
    return {"title": title, "ingredients": lines, "labels": labels}


def main():
    rng = random.Random(SEED)
    recipes = [make_recipe(rng) for _ in range(N_RECIPES)]

    # Intentional repeats: an exact copy, and the same dish listed under a
    # second cuisine (merged by dedup into one multi-label recipe).
    for i in range(0, 30, 10):
        recipes.append(json.loads(json.dumps(recipes[i])))
    for i in range(5, 40, 10):
        r = json.loads(json.dumps(recipes[i]))
        others = [c for c in CUISINE if c not in r["labels"]["cuisines"]]
        r["labels"] = {"cuisines": [rng.choice(others)]}
        recipes.append(r)

    out = Path(sys.argv[1] if len(sys.argv) > 1 else "data/sample/recipes.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w") as fh:
        for r in recipes:
            fh.write(json.dumps(r, separators=(",", ":")) + "\n")


if __name__ == "__main__":
    main()
