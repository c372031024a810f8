class Reader {
    String readAll(Scanner sc) {
        StringBuilder sb = new StringBuilder();
        while (sc.hasNext()) {
            sb.append(sc.next());
            sb.append(" ");
        }
        return sb.toString().trim();
    }
}
